#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "fdilab/classify.hpp"

namespace fdilab {

void KnnConfig::validate() const {
    if (k < 1) throw Error("knn: k must be >= 1");
}

int knn_predict(const Matrix& train, const std::vector<int>& labels, std::size_t k,
                const Eigen::Ref<const Vector>& query) {
    const std::size_t n = labels.size();
    if (n == 0) throw Error("knn: empty training set");
    if (k < 1 || k > n) throw Error("knn: k must be in [1, training size]");
    if (query.size() != train.cols()) throw Error("knn: feature dimension mismatch");

    std::vector<std::pair<double, std::size_t>> dist(n);
    const Eigen::Index d = train.cols();
    const double* q = query.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = train.row(static_cast<Eigen::Index>(i)).data();
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double t = row[j] - q[j];
            s += t * t;
        }
        dist[i] = {s, i};  // squared distance orders the same as distance
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    // nth_element leaves the k smallest (by distance, then index) in front.
    std::size_t ones = 0;
    for (std::size_t r = 0; r < k; ++r) ones += labels[dist[r].second] == 1;
    return 2 * ones > k ? 1 : 0;
}

int knn_predict(const KnnModel& model, const Eigen::Ref<const Vector>& query) {
    return knn_predict(model.x, model.labels, model.k, query);
}

}  // namespace fdilab
