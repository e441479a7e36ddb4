#pragma once

#include "rhf/linear_response.hpp"

#include <string>

namespace rhf {

struct DielectricBlochMatrix {
    Vec3 q = Vec3::Zero();
    CMat matrix; // over density_basis x density_basis
};

// eps~(q) = 1 - v_q^{1/2} chi0(q) v_q^{1/2}, v_q^{1/2}(K) = sqrt(4 pi)/|q+K|.
DielectricBlochMatrix epsilon_tilde(const BlochBands& bands, const FermiData& fermi, const Vec3& q);

// [eps~(q)^{-1}]_{00} from a matrix-free conjugate-gradient solve.
double inverse_head(const BlochBands& bands, const FermiData& fermi, const Vec3& q, double tol = 1e-11);

struct HeadLimitData {
    std::vector<Vec3> directions;
    std::vector<CVec> b_sigma;      // Fourier-series coefficients per direction
    std::vector<int> nonzero;       // density-basis positions with K != 0
    Eigen::MatrixX3cd beta;         // row r: beta_K for K = nonzero[r]
    CMat c_matrix;                  // C over nonzero x nonzero
};

HeadLimitData head_limit_data(const BlochBands& bands, const FermiData& fermi, const std::vector<Vec3>& directions);

struct MacroscopicTensor {
    Mat3 eps = Mat3::Identity();
    std::string route;
};

// Axes followed by the six face diagonals.
std::vector<Vec3> default_directions();

// Least-squares symmetric M with s^T M s = values[i] for unit directions s.
Mat3 fit_quadratic_form(const std::vector<Vec3>& directions, const std::vector<double>& values);

// Three-level Richardson extrapolation to eta -> 0 of samples with even error
// expansion, for etas {h, h/2, h/4}.
double richardson(const std::vector<double>& etas, const std::vector<double>& values);

// Route A: 1/[eps~^{-1}]_{00}(eta sigma) extrapolated to eta -> 0.
MacroscopicTensor epsilon_m_schur(const BlochBands& bands, const FermiData& fermi, const std::vector<double>& etas,
                                  const std::vector<Vec3>& directions);

// Route B: 1 + L - beta C^{-1} beta^*.
MacroscopicTensor epsilon_m_components(const HeadLimitData& head, const ResponseMatrixL& L);

} // namespace rhf
