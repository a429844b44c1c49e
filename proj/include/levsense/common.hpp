// common.hpp - physical constants, vector alias and error types shared by all
// levsense modules.
//
// All quantities are SI. Angular frequencies (rad/s) are used internally;
// conversion to Hz happens only at I/O boundaries.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace levsense {

using Vec3 = Eigen::Vector3d;

namespace phys {
// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double kB = 1.380649e-23;        // J/K
inline constexpr double mu0 = 1.25663706212e-6;   // H/m
inline constexpr double flux_quantum = 2.067833848e-15;  // Wb
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace phys

inline constexpr double hz_to_rad(double f_hz) { return phys::two_pi * f_hz; }
inline constexpr double rad_to_hz(double w) { return w / phys::two_pi; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by a module contract maps to one of these.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Dipole (or field point) lies on the loop integration path.
class SingularGeometryError : public Error {
public:
    using Error::Error;
};

/// Flux bias inside the exclusion window around a half-integer flux quantum.
class NearSingularityError : public Error {
public:
    using Error::Error;
};

class InitializationError : public Error {
public:
    using Error::Error;
};

/// Iterative solver gave up. Carries the best parameter vector found so far.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best)
        : Error(what), best_so_far(std::move(best)) {}
    std::vector<double> best_so_far;
};

class ExtrapolationError : public Error {
public:
    using Error::Error;
};

/// Requested target lies outside the achievable range.
class RangeError : public Error {
public:
    RangeError(const std::string& what, double max_achievable)
        : Error(what), max_achievable(max_achievable) {}
    double max_achievable;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class UnphysicalInputError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace levsense
