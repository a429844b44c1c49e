// noise_budget.hpp - imprecision, efficiencies, back-action, amplifier chain
// and cooperativity projections.
//
// Coupling strengths G and g0 are angular (rad/s per m, rad/s) unless the
// name says otherwise. Displacement densities are one-sided, m^2/Hz.

#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "levsense/common.hpp"
#include "levsense/mech_trap.hpp"

namespace levsense::budget {

/// kappa / (16 nr G^2) * (1 + 4 Omega^2 / kappa^2).
double imprecision_quantum(double kappa, double nr, double G, double omega);

/// S_imp_quantum / S_imp_detected; throws UnphysicalInputError when the
/// detected level lies below the quantum limit.
double detection_efficiency(double s_imp_quantum, double s_imp_detected);

/// 4 nr g0^2 / (kappa Gamma_m nth).
double cooperativity(double nr, double g0, double kappa, double gamma_m, double nth);

double measurement_efficiency(double cq);
double total_efficiency(double eta_d, double eta_e);

/// (1/sqrt(eta) - 1) / 2; DivergenceError at eta = 0.
double min_phonons(double eta);

/// 4 xzpf^2 / (Gamma_m nth).
double ground_state_density(double xzpf, double gamma_m, double nth);

/// 1 / (m (Omega_m^2 - Omega^2 - i Gamma Omega)), m/N.
std::complex<double> susceptibility(double omega, double mass, double omega_m, double gamma);

struct BackActionInputs {
    double G_over_2pi = 0.0;  // Hz/m
    double nr = 0.0;
    double kappa = 0.0;       // rad/s
    double mass = 0.0;        // kg
    double omega_m = 0.0;     // rad/s
    double gamma_m = 0.0;     // rad/s
    double gamma_eff = 0.0;   // rad/s
};

struct BackAction {
    double force_psd;  // N^2/Hz
    double thermal;    // m^2/Hz, intrinsic damping
    double ground;     // m^2/Hz, damping Gamma_eff
};

/// 4 hbar^2 G^2 nr / kappa.
double back_action_force(double G, double nr, double kappa);

BackAction back_action_densities(const BackActionInputs& in);

struct AmplifierStage {
    double noise_temperature;  // K
    double gain_db;
};

/// T1 + T2/G1 + T3/(G1 G2) + ...
double friis(const std::vector<AmplifierStage>& stages);

/// kB T / (hbar omega).
double added_photons(double temperature, double omega);

/// n_HEMT / Lambda + (1 - Lambda) / (2 Lambda).
double cryo_chain(double n_hemt, double transmissivity);

/// Lambda = (n_HEMT + 1/2) / (n_add + 1/2).
double invert_loss(double n_hemt, double n_add);

/// (1 + kappa_int / kappa_ext)^-1.
double cavity_efficiency(double kappa_int, double kappa_ext);

struct EfficiencyBudget {
    double eta_cav = 1.0;
    double eta_cryo = 1.0;
    double eta_warm = 1.0;
    double eta_d = 1.0;
    double eta_e = 1.0;
    double eta = 1.0;
    double n_add_cryo = 0.0;
    double n_hemt = 0.0;
    double transmissivity = 1.0;
};

/// eta_d = eta_cav eta_cryo eta_warm; eta_e and eta left at 1 until
/// with_cooperativity is applied. n_add_cryo follows from eta_cryo.
EfficiencyBudget budget_assemble(double eta_cav, double eta_cryo, double eta_warm);

/// The third factor given the measured eta_d and the other two.
double solve_missing_factor(double eta_d, double known_a, double known_b);

EfficiencyBudget with_cooperativity(EfficiencyBudget b, double cq);
EfficiencyBudget with_hemt(EfficiencyBudget b, double n_hemt);

struct DesignCooperativity {
    double closed_form;  // platform-parameter expression
    double assembled;    // cooperativity(nr, g0, ...) with g0 from the flux chain
    double ratio() const { return closed_form / assembled; }
};

/// Closed-form platform expression with the slope taken per weber, next to
/// the canonical assembled value. Both use the given trap axis.
DesignCooperativity design_cooperativity(const mech::TrapConfig& trap,
                                         const mech::SphereParams& sphere, double nr,
                                         double kappa, double slope, double alpha,
                                         double geometric_factor, mech::Axis axis = mech::Axis::z);

struct LedgerFactor {
    std::string name;
    double multiplier;
    std::string note;
};

struct ProjectionLedger {
    double base_cq = 0.0;
    std::vector<LedgerFactor> factors;
};

struct ProjectionRow {
    std::string name;
    double multiplier;
    double cumulative;
};

struct Projection {
    std::vector<ProjectionRow> rows;
    double final_cq;
};

Projection project(const ProjectionLedger& ledger);

/// Readout, positioning, transformer, slope, linewidth and current-switch
/// steps starting from Cq = 5e-17.
ProjectionLedger default_ledger();

struct Uncertain {
    double value;
    double sigma;
};

/// First-order propagation: sigma^2 = grad^T cov grad with a central
/// difference gradient.
Uncertain propagate(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, const Eigen::MatrixXd& cov);

/// Independent inputs: diagonal covariance from sigmas.
Uncertain propagate(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& sigma);

}  // namespace levsense::budget
