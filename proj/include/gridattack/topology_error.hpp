#pragma once

#include <string>
#include <vector>

#include "gridattack/network_model.hpp"
#include "gridattack/types.hpp"
#include "gridattack/wls_estimator.hpp"

/// Branch topology errors: the mismatch between the network model in use and
/// an erroneous variant with one branch status flipped, expressed as a
/// Jacobian perturbation D = H_true - H_model with the rank-one structure
/// D x = L f(x).
namespace gridattack {

enum class ErrorKind {
    inclusion,  ///< branch assumed in service; the erroneous model has it open
    exclusion,  ///< branch assumed out of service; the erroneous model has it closed
};

struct TopologyError {
    int branch = -1;  ///< position in the case branch list
    ErrorKind kind = ErrorKind::inclusion;
};

inline TopologyError make_error(const GridCase& grid, int from_bus, int to_bus,
                                ErrorKind kind) {
    return TopologyError{grid.branch_position(from_bus, to_bus), kind};
}

inline std::string kind_name(ErrorKind kind) {
    return kind == ErrorKind::inclusion ? "inclusion" : "exclusion";
}

struct TopologyErrorModel {
    TopologyError error;
    Mat H_true;   ///< Jacobian of the assumed (correct) topology
    Mat H_model;  ///< Jacobian of the erroneous topology
    Mat D;        ///< H_true - H_model; nonzero only on the 4 rows touching the branch
    Vec L;        ///< +-1 incidence signature of those rows
    bool estimator_observable = false;  ///< H_model has full column rank
    Mat hat_model;            ///< M_e for H_model (empty when unobservable)
    Mat residue_covariance;   ///< Omega_e for H_model (empty when unobservable)
};

/// Build the error model around `grid`'s own branch statuses. Jacobians are
/// assembled without the connectivity gate so that D, L, and f stay defined
/// even when one side of the error splits the graph (bridge branches); the
/// estimator-side geometry (M_e, Omega_e) is attached only when H_model has
/// full column rank.
inline TopologyErrorModel build_error_model(const GridCase& grid, const TopologyError& error,
                                            const Vec& sigma) {
    if (error.branch < 0 || error.branch >= grid.n_branches())
        throw validation_error("topology error references branch out of range");
    if (sigma.size() != grid.n_measurements())
        throw dimension_error("noise model must cover every measurement");

    const bool assumed_closed = error.kind == ErrorKind::inclusion;
    std::vector<bool> closed_true = case_status(grid);
    std::vector<bool> closed_model = closed_true;
    closed_true[error.branch] = assumed_closed;
    closed_model[error.branch] = !assumed_closed;

    TopologyErrorModel model;
    model.error = error;
    model.H_true = build_jacobian(grid, closed_true, /*require_connected=*/false);
    model.H_model = build_jacobian(grid, closed_model, /*require_connected=*/false);
    model.D = model.H_true - model.H_model;

    const MeasurementLayout layout(grid);
    const auto& br = grid.branches[error.branch];
    model.L = Vec::Zero(layout.size());
    model.L[layout.injection(grid.bus_position(br.from))] = 1.0;
    model.L[layout.injection(grid.bus_position(br.to))] = -1.0;
    model.L[layout.from_flow(error.branch)] = 1.0;
    model.L[layout.to_flow(error.branch)] = -1.0;

    Eigen::ColPivHouseholderQR<Mat> qr(model.H_model);
    model.estimator_observable = qr.rank() == model.H_model.cols();
    if (model.estimator_observable) {
        const EstimationResult probe =
            estimate(model.H_model, sigma, Vec::Zero(layout.size()));
        model.hat_model = probe.hat_matrix;
        model.residue_covariance = probe.residue_covariance;
    }
    return model;
}

inline TopologyErrorModel build_error_model(const GridCase& grid, const TopologyError& error,
                                            double sigma = kDefaultSigma) {
    return build_error_model(grid, error, Vec::Constant(grid.n_measurements(), sigma));
}

/// Scalar flow carried by the errored branch at state x, signed so that
/// D x = L f exactly: f = b (theta_from - theta_to) for an inclusion error
/// and its negative for an exclusion error.
inline double error_flow(const GridCase& grid, const TopologyError& error, const Vec& x) {
    if (x.size() != grid.n_states()) throw dimension_error("state must have n-1 entries");
    const auto& br = grid.branches[error.branch];
    auto angle = [&](int bus) {
        return bus == grid.slack_bus ? 0.0 : x[grid.state_column(bus)];
    };
    const double f = br.susceptance * (angle(br.from) - angle(br.to));
    return error.kind == ErrorKind::inclusion ? f : -f;
}

/// Residue the erroneous estimator is expected to show when the actual
/// system sits at state x: (I - M_e) D x.
inline Vec expected_residue(const TopologyErrorModel& model, const Vec& x) {
    if (!model.estimator_observable)
        throw numerical_error("erroneous model is unobservable; expected residue undefined");
    const Vec dx = model.D * x;
    return dx - model.hat_model * dx;
}

/// A topology error is detectable at state x when its expected residue rises
/// above the noise-free tolerance.
inline bool is_detectable(const TopologyErrorModel& model, const Vec& x, double tol = 1e-8) {
    return expected_residue(model, x).lpNorm<Eigen::Infinity>() > tol;
}

}  // namespace gridattack
