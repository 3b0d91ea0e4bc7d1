#include "aqc/data_io/window.hpp"

#include "aqc/errors.hpp"

namespace aqc::data {

Tensor WindowSample::last_wind() const {
    const auto& s = p_hist.shape();
    if (s.size() != 3 || s[2] != 2 || s[0] == 0) {
        throw DimensionError("window wind must be T x N x 2, got " + num::to_string(s));
    }
    const std::size_t t = s[0] - 1, n = s[1];
    Tensor out = Tensor::zeros(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, 0) = p_hist[(t * n + i) * 2];
        out(i, 1) = p_hist[(t * n + i) * 2 + 1];
    }
    return out;
}

}  // namespace aqc::data
