#include "fdilab/mask.hpp"

#include <algorithm>

namespace fdilab {

FeatureMask::FeatureMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
}

FeatureMask FeatureMask::all(std::size_t m) { return FeatureMask(std::vector<std::uint8_t>(m, 1)); }

FeatureMask FeatureMask::none(std::size_t m) { return FeatureMask(std::vector<std::uint8_t>(m, 0)); }

FeatureMask FeatureMask::from_string(const std::string& bits) {
    std::vector<std::uint8_t> out;
    out.reserve(bits.size());
    for (char ch : bits) {
        if (ch != '0' && ch != '1') throw Error("feature mask must be a 0/1 string");
        out.push_back(ch == '1' ? 1 : 0);
    }
    return FeatureMask(std::move(out));
}

std::size_t FeatureMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> FeatureMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < bits_.size(); ++j)
        if (bits_[j]) out.push_back(j);
    return out;
}

std::string FeatureMask::str() const {
    std::string s(bits_.size(), '0');
    for (std::size_t j = 0; j < bits_.size(); ++j)
        if (bits_[j]) s[j] = '1';
    return s;
}

Matrix select_columns(const Matrix& x, const FeatureMask& mask) {
    if (mask.size() != static_cast<std::size_t>(x.cols())) throw Error("feature mask length mismatch");
    const auto idx = mask.indices();
    if (idx.size() == mask.size()) return x;
    Matrix out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
        out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(idx[k]));
    return out;
}

Vector select_entries(const Vector& v, const FeatureMask& mask) {
    if (mask.size() != static_cast<std::size_t>(v.size())) throw Error("feature mask length mismatch");
    const auto idx = mask.indices();
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(idx[k])];
    return out;
}

}  // namespace fdilab
