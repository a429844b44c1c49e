// Independent reference values for the unit tests. Constants are typed in
// here rather than taken from the library.
#pragma once

#include <cmath>

namespace oracle {

constexpr double hbar = 1.054571817e-34;
constexpr double kB = 1.380649e-23;
constexpr double mu0 = 1.25663706212e-6;
constexpr double phi0 = 2.067833848e-15;
constexpr double pi = 3.14159265358979323846;

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace oracle
