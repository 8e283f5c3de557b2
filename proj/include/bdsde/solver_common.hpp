#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bdsde/errors.hpp"

namespace bdsde {

struct SolverOptions {
    int quad_nodes = 8;
};

namespace detail {

inline void check_field_finite(const std::vector<double>& v, int step,
                               const char* where) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(where) +
                                   ": field blew up at step " + std::to_string(step),
                               step);
}

} // namespace detail

} // namespace bdsde
