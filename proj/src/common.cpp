#include "qbsde/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qbsde {

const char* version() noexcept { return QBSDE_VERSION; }

double norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool clip_to_ball(std::span<double> v, double radius) noexcept {
    if (!(radius < std::numeric_limits<double>::infinity())) return false;
    const double n = norm(v);
    if (n <= radius) return false;
    if (radius <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        return true;
    }
    // Small fixed-size buffer; vectors here are at most d <= a handful.
    double original[16];
    std::vector<double> heap;
    double* src = original;
    if (v.size() > 16) {
        heap.assign(v.begin(), v.end());
        src = heap.data();
    } else {
        std::copy(v.begin(), v.end(), original);
    }
    double scale = radius / n;
    for (;;) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = src[i] * scale;
        if (norm(v) <= radius) break;
        scale = std::nextafter(scale, 0.0);
    }
    return true;
}

}  // namespace qbsde
