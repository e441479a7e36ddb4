#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rhf {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IVec3 = std::array<int, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr const char* kVersion = "0.3.1";

// Errors carry a category so the CLI can map them onto exit codes.
enum class ErrorKind { Validation, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

inline IVec3 operator+(const IVec3& a, const IVec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline IVec3 operator-(const IVec3& a, const IVec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline IVec3 operator-(const IVec3& a) { return {-a[0], -a[1], -a[2]}; }

// Worker count from RHF_NUM_THREADS, defaulting to the hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n). Results must be written to per-index slots;
// callers reduce afterwards in index order so output is thread-count independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace rhf
