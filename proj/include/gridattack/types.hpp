#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Core value types shared by every module: dense linear-algebra aliases,
/// the error taxonomy that maps onto the CLI exit-code contract, the grid
/// case model, and the canonical measurement layout
/// (injections by bus order, then from-side flows, then to-side flows,
/// both in branch file order).
namespace gridattack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// --- error taxonomy ---------------------------------------------------------
// Exit-code contract: validation-class errors (malformed/ inconsistent input)
// exit with 2; computation-class errors (infeasible, singular, non-converged)
// exit with 1.

/// Base for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input could not be parsed (malformed JSON, wrong field types).
struct parse_error : error {
    using error::error;
};

/// Input parsed but violates an invariant (duplicate bus, bad index, ...).
struct validation_error : error {
    using error::error;
};

/// Vector/matrix dimensions do not agree.
struct dimension_error : validation_error {
    using validation_error::validation_error;
};

/// The closed-branch graph is not connected.
struct connectivity_error : validation_error {
    using validation_error::validation_error;
};

/// A linear system is singular / a matrix is rank deficient.
struct numerical_error : error {
    using error::error;
};

/// The attack problem has an empty feasible set; carries the offending
/// measurement indices (1-based, as in files and reports).
struct infeasible_error : error {
    explicit infeasible_error(const std::string& what, std::vector<int> indices_1based)
        : error(what), indices(std::move(indices_1based)) {}
    std::vector<int> indices;
};

/// Iterative solver hit its iteration cap before reaching tolerance.
struct convergence_error : error {
    using error::error;
};

/// Time-series model fitting failed (constant history, singular system).
struct fitting_error : error {
    using error::error;
};

// --- network case -----------------------------------------------------------

struct Branch {
    int from = 0;
    int to = 0;
    double susceptance = 0.0;  ///< 1/x under the DC assumption
    bool closed = true;
};

/// A bus/branch network with a designated slack bus. Bus ids are arbitrary
/// integers; positions in `buses` fix the canonical ordering everywhere.
struct GridCase {
    std::string name;
    int slack_bus = 0;
    std::vector<int> buses;
    std::vector<Branch> branches;
    /// Net per-bus real power injection (p.u.), aligned with `buses`.
    std::optional<Vec> operating_injections;

    [[nodiscard]] int n_buses() const { return static_cast<int>(buses.size()); }
    [[nodiscard]] int n_branches() const { return static_cast<int>(branches.size()); }
    [[nodiscard]] int n_states() const { return n_buses() - 1; }
    [[nodiscard]] int n_measurements() const { return n_buses() + 2 * n_branches(); }

    /// Position of a bus id in `buses`; throws if unknown.
    [[nodiscard]] int bus_position(int bus_id) const {
        for (int i = 0; i < n_buses(); ++i)
            if (buses[i] == bus_id) return i;
        throw validation_error("unknown bus id " + std::to_string(bus_id) +
                               " in case '" + name + "'");
    }

    /// State-vector column of a non-slack bus (slack column removed).
    [[nodiscard]] int state_column(int bus_id) const {
        if (bus_id == slack_bus)
            throw validation_error("slack bus has no state column");
        int col = 0;
        for (int id : buses) {
            if (id == bus_id) return col;
            if (id != slack_bus) ++col;
        }
        throw validation_error("unknown bus id " + std::to_string(bus_id));
    }

    /// Bus id owning state column `col`.
    [[nodiscard]] int state_bus(int col) const {
        int c = 0;
        for (int id : buses) {
            if (id == slack_bus) continue;
            if (c == col) return id;
            ++c;
        }
        throw dimension_error("state column out of range");
    }

    /// Branch position by endpoint pair (order-insensitive); throws if absent.
    [[nodiscard]] int branch_position(int from, int to) const {
        for (int k = 0; k < n_branches(); ++k) {
            const auto& br = branches[k];
            if ((br.from == from && br.to == to) || (br.from == to && br.to == from))
                return k;
        }
        throw validation_error("no branch " + std::to_string(from) + "-" +
                               std::to_string(to) + " in case '" + name + "'");
    }
};

// --- canonical measurement layout --------------------------------------------

/// Index helpers for the canonical measurement ordering. All returned indices
/// are 0-based; files and reports add 1.
struct MeasurementLayout {
    int n_buses = 0;
    int n_branches = 0;

    explicit MeasurementLayout(const GridCase& grid)
        : n_buses(grid.n_buses()), n_branches(grid.n_branches()) {}
    MeasurementLayout(int buses, int branches) : n_buses(buses), n_branches(branches) {}

    [[nodiscard]] int size() const { return n_buses + 2 * n_branches; }
    [[nodiscard]] int injection(int bus_position) const { return bus_position; }
    [[nodiscard]] int from_flow(int branch_position) const { return n_buses + branch_position; }
    [[nodiscard]] int to_flow(int branch_position) const {
        return n_buses + n_branches + branch_position;
    }

    /// Human-readable label, e.g. "P_3", "P_3_4", "P_4_3".
    [[nodiscard]] std::string label(int index, const GridCase& grid) const {
        if (index < n_buses) return "P_" + std::to_string(grid.buses[index]);
        if (index < n_buses + n_branches) {
            const auto& br = grid.branches[index - n_buses];
            return "P_" + std::to_string(br.from) + "_" + std::to_string(br.to);
        }
        const auto& br = grid.branches[index - n_buses - n_branches];
        return "P_" + std::to_string(br.to) + "_" + std::to_string(br.from);
    }
};

/// Ordered measurement values in the canonical layout.
struct MeasurementVector {
    Vec values;

    [[nodiscard]] int size() const { return static_cast<int>(values.size()); }
};

/// Diagonal measurement-error model: per-measurement standard deviations.
struct WeightModel {
    Vec sigma;

    static WeightModel uniform(int m, double sigma_value) {
        WeightModel w;
        w.sigma = Vec::Constant(m, sigma_value);
        return w;
    }

    [[nodiscard]] int size() const { return static_cast<int>(sigma.size()); }
    [[nodiscard]] Vec variances() const { return sigma.array().square(); }
    /// Diagonal of R^{-1}.
    [[nodiscard]] Vec inverse_variances() const { return sigma.array().square().inverse(); }
    void validate() const {
        if ((sigma.array() <= 0.0).any())
            throw validation_error("weight model requires every sigma > 0");
    }
};

constexpr double kDefaultSigma = 0.01;       ///< p.u., applied when no weight file given
constexpr double kRadToDeg = 57.295779513082320877;

}  // namespace gridattack
