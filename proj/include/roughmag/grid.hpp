#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "roughmag/errors.hpp"

namespace roughmag {

// A vector-valued path sampled on a strictly increasing time grid starting
// at 0. Values are stored node-major: value(k, i) = values[k * dim + i].
struct GridPath {
    std::vector<double> times;
    int dim = 0;
    std::vector<double> values;

    GridPath() = default;

    GridPath(std::vector<double> t, int d)
        : times(std::move(t)), dim(d), values(times.size() * static_cast<std::size_t>(d), 0.0) {
        check_times();
    }

    GridPath(std::vector<double> t, int d, std::vector<double> v)
        : times(std::move(t)), dim(d), values(std::move(v)) {
        check_times();
        if (values.size() != times.size() * static_cast<std::size_t>(dim))
            throw DimensionMismatch("GridPath: values count does not match times * dim");
        for (double x : values)
            if (!std::isfinite(x)) throw NumericalError("GridPath: non-finite value");
    }

    std::size_t nodes() const { return times.size(); }
    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }

    double& value(std::size_t node, int i) { return values[node * dim + i]; }
    double value(std::size_t node, int i) const { return values[node * dim + i]; }

    const double* node_ptr(std::size_t node) const { return values.data() + node * dim; }
    double* node_ptr(std::size_t node) { return values.data() + node * dim; }

    void check_times() const {
        if (times.empty()) throw NumericalError("GridPath: empty time grid");
        if (times.front() != 0.0) throw NumericalError("GridPath: grid must start at t = 0");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1]))
                throw NumericalError("GridPath: times must be strictly increasing");
    }
};

inline std::vector<double> uniform_grid(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || steps == 0) throw NumericalError("uniform_grid: need horizon > 0 and steps > 0");
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    t[0] = 0.0;
    t[steps] = horizon;
    return t;
}

inline std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// CSV layout: header `t,c0,...,c{d-1}`, one row per node, full precision.
inline void write_csv(const GridPath& path, std::ostream& os) {
    os << 't';
    for (int i = 0; i < path.dim; ++i) os << ",c" << i;
    os << '\n';
    for (std::size_t k = 0; k < path.nodes(); ++k) {
        os << format_full(path.times[k]);
        for (int i = 0; i < path.dim; ++i) os << ',' << format_full(path.value(k, i));
        os << '\n';
    }
}

inline void write_csv(const GridPath& path, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("cannot open " + filename);
    write_csv(path, os);
}

}  // namespace roughmag
