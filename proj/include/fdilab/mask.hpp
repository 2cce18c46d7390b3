#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fdilab/common.hpp"

namespace fdilab {

/// Binary feature selector: bit j = 1 keeps measurement j.
class FeatureMask {
public:
    FeatureMask() = default;
    explicit FeatureMask(std::vector<std::uint8_t> bits);
    static FeatureMask all(std::size_t m);
    static FeatureMask none(std::size_t m);
    static FeatureMask from_string(const std::string& bits);

    std::size_t size() const { return bits_.size(); }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool operator[](std::size_t j) const { return bits_[j] != 0; }
    void set(std::size_t j, bool on) { bits_[j] = on ? 1 : 0; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    std::vector<std::size_t> indices() const;
    /// '0'/'1' string, also the cache key.
    std::string str() const;

    bool operator==(const FeatureMask&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Columns of `x` selected by `mask` (all columns when the mask is all-ones).
Matrix select_columns(const Matrix& x, const FeatureMask& mask);
Vector select_entries(const Vector& v, const FeatureMask& mask);

}  // namespace fdilab
