#include "rhf/homogenization.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>

namespace rhf {

KGrid homogenization_grid(double radius, double step)
{
    if (!(radius > 0.0 && step > 0.0)) throw ValidationError("homogenization grid: radius and step must be positive");
    KGrid grid;
    grid.cell = step * step * step;
    const int n = static_cast<int>(std::ceil(radius / step)) + 1;
    for (int i = -n; i < n; ++i)
        for (int j = -n; j < n; ++j)
            for (int l = -n; l < n; ++l) {
                Vec3 k((i + 0.5) * step, (j + 0.5) * step, (l + 0.5) * step);
                if (k.norm() <= radius * (1.0 + 1e-12)) grid.points.push_back(k);
            }
    return grid;
}

MomentumDensity rescale_density(const MomentumDensity& nu, double eta)
{
    if (!(eta > 0.0)) throw ValidationError("rescale_density: eta must be positive");
    return [nu, eta](const Vec3& k) { return nu(k / eta); };
}

RescaledPotential rescaled_potential(const BlochBands& bands, const FermiData& fermi, const MomentumDensity& nu,
                                     double eta, const KGrid& grid)
{
    if (!(eta > 0.0)) throw ValidationError("rescaled_potential: eta must be positive");
    const double inscribed = bands.model.lattice.inscribed_radius();
    for (const Vec3& k : grid.points)
        if (!(eta * k.norm() < inscribed)) throw ValidationError("rescaled_potential: eta k outside the Brillouin zone");

    // The head is even in k (time reversal), so only one of each +-k pair is solved.
    std::vector<std::size_t> rep(grid.points.size());
    std::vector<std::size_t> unique;
    std::map<std::array<long long, 3>, std::size_t> seen;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        std::array<long long, 3> key, neg;
        for (int d = 0; d < 3; ++d) {
            key[static_cast<std::size_t>(d)] = std::llround(grid.points[i][d] * 1e9);
            neg[static_cast<std::size_t>(d)] = -key[static_cast<std::size_t>(d)];
        }
        auto it = seen.find(neg);
        if (it != seen.end()) {
            rep[i] = it->second;
        } else {
            rep[i] = unique.size();
            seen[key] = unique.size();
            unique.push_back(i);
        }
    }
    std::vector<double> heads(unique.size());
    for (std::size_t u = 0; u < unique.size(); ++u)
        heads[u] = inverse_head(bands, fermi, eta * grid.points[unique[u]]);

    RescaledPotential out;
    out.eta = eta;
    out.k = grid.points;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const Vec3& k = grid.points[i];
        out.w_hat.push_back(4.0 * kPi * heads[rep[i]] * nu(k) / k.squaredNorm());
    }
    return out;
}

HomogenizedSolution homogenized_solution(const MomentumDensity& nu, const Mat3& epsilon_m, const KGrid& grid)
{
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (epsilon_m + epsilon_m.transpose()));
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw ValidationError("homogenized_solution: eps_M is not positive definite");
    HomogenizedSolution out;
    out.epsilon_m = epsilon_m;
    out.k = grid.points;
    for (const Vec3& k : grid.points) out.w_hat.push_back(4.0 * kPi * nu(k) / k.dot(epsilon_m * k));
    return out;
}

std::vector<TestWeight> default_test_weights()
{
    return {{Vec3(0.0, 0.0, 0.0), 0.5},
            {Vec3(0.6, 0.0, 0.0), 0.4},
            {Vec3(0.0, 0.8, 0.3), 0.5},
            {Vec3(-0.5, 0.5, 0.5), 0.6},
            {Vec3(0.4, -0.7, 0.9), 0.35}};
}

double weak_convergence_metric(const RescaledPotential& w_eta, const HomogenizedSolution& w_hom,
                               const std::vector<TestWeight>& weights)
{
    if (w_eta.k.size() != w_hom.k.size()) throw ValidationError("weak_convergence_metric: grids differ");
    for (std::size_t i = 0; i < w_eta.k.size(); ++i)
        if ((w_eta.k[i] - w_hom.k[i]).norm() > 1e-12) throw ValidationError("weak_convergence_metric: grids differ");
    double worst = 0.0;
    for (const auto& g : weights) {
        cplx num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < w_eta.k.size(); ++i) {
            double gk = g(w_eta.k[i]);
            num += (w_eta.w_hat[i] - w_hom.w_hat[i]) * gk;
            den += w_hom.w_hat[i] * gk;
        }
        if (std::abs(den) == 0.0) continue;
        worst = std::max(worst, std::abs(num) / std::abs(den));
    }
    return worst;
}

} // namespace rhf
