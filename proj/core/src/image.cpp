#include "fsplat/image.hpp"

#include <algorithm>
#include <cmath>

namespace fsplat {

double max_abs_diff(const Image& a, const Image& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    }
    return m;
}

}  // namespace fsplat
