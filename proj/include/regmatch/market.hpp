#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

/// Aggregate matching markets with regional floor/ceiling constraints.
namespace regmatch {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
};

/// Input file could not be parsed.
class ParseError : public Error {
    public:
        using Error::Error;
};

/// Input parsed but violates a schema or model invariant.
class SchemaError : public Error {
    public:
        using Error::Error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
    public:
        using Error::Error;
};

/// A numeric input is outside the representable or admissible range.
class RangeError : public Error {
    public:
        using Error::Error;
};

/// The regional quotas cannot be met by any tax scheme.
class InfeasibleError : public Error {
    public:
        using Error::Error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows{r}, cols{c}, data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

/** Observable side of the market: worker types X, slot types Y, regions Z and their quotas.
 *
 * The outside region (where unmatched agents sit) is implicit and never stored. Masses and quotas
 * are indexed by position; identifiers are opaque labels used only for file I/O and reporting.
 */
struct MarketSpec {
    std::vector<std::string> worker_types;
    std::vector<std::string> slot_types;
    std::vector<std::string> regions;
    std::vector<double> n;                  ///< worker mass per worker type
    std::vector<double> m;                  ///< slot mass per slot type
    std::vector<std::size_t> region_of;     ///< region index of each slot type
    std::vector<double> upper;              ///< ceiling per region, +inf when absent
    std::vector<double> lower;              ///< floor per region, 0 when absent

    std::size_t num_workers() const { return worker_types.size(); }
    std::size_t num_slots() const { return slot_types.size(); }
    std::size_t num_regions() const { return regions.size(); }

    /// Position of a region identifier; throws SchemaError if unknown.
    std::size_t region_index(const std::string& id) const;

    bool operator==(const MarketSpec&) const = default;
};

/// Systematic joint surplus Phi over worker-type x slot-type pairs (null pairs are implicitly zero).
struct SurplusMatrix {
    Matrix phi;

    bool operator==(const SurplusMatrix&) const = default;
};

/// Per-region signed tax; positive is a tax, negative a subsidy.
struct TaxScheme {
    std::vector<double> w;

    static TaxScheme zeros(std::size_t regions) { return TaxScheme{std::vector<double>(regions, 0.0)}; }

    /// max(0, w_z)
    double upper_part(std::size_t z) const { return w[z] > 0.0 ? w[z] : 0.0; }
    /// -min(0, w_z)
    double lower_part(std::size_t z) const { return w[z] < 0.0 ? -w[z] : 0.0; }

    bool operator==(const TaxScheme&) const = default;
};

/// Match masses over all type pairs, including the unmatched masses of each side.
struct Matching {
    Matrix matched;                         ///< N x M block mu_xy
    std::vector<double> unmatched_workers;  ///< mu_{x y0}
    std::vector<double> unmatched_slots;    ///< mu_{x0 y}

    bool operator==(const Matching&) const = default;
};

/// Type-pair systematic utilities; the null-pair utilities are fixed at zero and not stored.
struct SystematicUtilities {
    Matrix U;
    Matrix V;

    bool operator==(const SystematicUtilities&) const = default;
};

struct Diagnostics {
    double dual_value = 0.0;
    double primal_value = 0.0;
    double duality_gap = 0.0;
    double max_kkt_residual = 0.0;
    long inner_iterations = 0;
    long outer_iterations = 0;
    bool converged = false;

    bool operator==(const Diagnostics&) const = default;
};

/// Profile (mu, (U, V, w)) together with solver diagnostics.
struct EquilibriumResult {
    Matching matching;
    SystematicUtilities utilities;
    TaxScheme taxes;
    Diagnostics diagnostics;

    bool operator==(const EquilibriumResult&) const = default;
};

/// Every violated invariant of a market specification; empty means admissible.
struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

ValidationReport validate_market(const MarketSpec& spec);

/// Same checks as validate_market, throwing SchemaError listing all violations.
void require_valid(const MarketSpec& spec);

/// Matched mass of region z (unmatched masses excluded).
double region_mass(const Matching& mu, std::size_t z, const MarketSpec& spec);
double region_mass(const Matching& mu, const std::string& region, const MarketSpec& spec);

/// Matched mass of every region at once.
std::vector<double> region_masses(const Matching& mu, const MarketSpec& spec);

/// Largest absolute deviation of the row/column sums of mu from n and m.
double population_residual(const Matching& mu, const MarketSpec& spec);

/// Throws DimensionError unless the shapes of phi agree with spec.
void check_dimensions(const MarketSpec& spec, const SurplusMatrix& phi);
void check_dimensions(const MarketSpec& spec, const TaxScheme& w);
void check_dimensions(const MarketSpec& spec, const Matching& mu);

}  // namespace regmatch
