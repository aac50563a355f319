#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcsae/basis.hpp"
#include "lcsae/data.hpp"
#include "lcsae/sampler.hpp"

namespace lcsae {

struct InferenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Median-unbiased empirical quantile (interpolation between order statistics
/// at p*(n+1/3)+1/3) of an unsorted sample.
double empirical_quantile(std::vector<double> draws, double p);

/// Posterior summary of the count of class-c people in small area j.
struct CountEstimate {
    int small_area = 0;
    int latent_class = 0;
    double mean = 0.0;
    std::optional<double> cv_percent;  // 100*sd/mean; null when mean == 0
    double q025 = 0.0;
    double q50 = 0.0;
    double q975 = 0.0;
    std::vector<double> draws;  // retained only on request
};

struct CountEstimateTable {
    int n_areas = 0;
    int n_classes = 0;
    std::vector<CountEstimate> estimates;  // area-major: (j, c)

    const CountEstimate& at(int area, int cls) const {
        return estimates.at(static_cast<std::size_t>((area - 1) * n_classes + cls - 1));
    }
};

/// Count estimator: per kept draw m, per population cell l, class shares from
/// the membership model; counts aggregate N_l * P^(m)(class | cell) over the
/// cells of each small area, then summarize over draws. Exactly coherent:
/// the class counts of an area sum to its population in every draw.
CountEstimateTable estimate_counts(const ChainOutput& chain, const PopulationCellTable& cells,
                                   const SplineDesign& design, bool keep_draws = false);

struct DevianceCDF {
    std::string label;
    std::vector<double> sorted_draws;
    std::vector<double> grid;  // shared evaluation grid
    std::vector<double> ecdf;  // P(D <= grid point)
};

/// One ECDF per chain on a common grid spanning all draws.
std::vector<DevianceCDF> deviance_cdf(const std::vector<const ChainOutput*>& chains,
                                      const std::vector<std::string>& labels, int grid_points = 201);

struct PPCReport {
    std::vector<int> unit_indices;  // units included (0-based into the data)
    std::vector<double> p_values;
    int excluded_units = 0;  // responses all at the minimum category
    double q025 = 0, q25 = 0, mean = 0, median = 0, q75 = 0, q975 = 0;
};

/// Posterior predictive check: per kept draw, simulate one replicate pattern
/// Y* and one second-stage replicate Y** per unit; p = fraction of draws with
/// d(Y, Y*) > d(Y*, Y**) where d is the L1 distance between response vectors.
/// Units whose every response is the minimum category are excluded. max_draws
/// caps the draws used (0 = all), thinning uniformly.
PPCReport ppc_pvalues(const ChainOutput& chain, const ItemResponseMatrix& data,
                      const SplineDesign& design, std::uint64_t seed, long max_draws = 0);

struct Classification {
    Eigen::MatrixXd probs;         // n x C averaged responsibilities
    std::vector<int> map_class;    // 1-based argmax, ties to the lower class
    std::vector<bool> tie_flag;
    std::vector<double> class_shares;  // fraction of units assigned to each class
};

Classification classify_units(const ChainOutput& chain, const ItemResponseMatrix& data,
                              const SplineDesign& design);

struct ParameterSummary {
    std::string name;
    double mean = 0, sd = 0;
    double q025 = 0, q50 = 0, q975 = 0;
    double ess = 0;
    bool degenerate = false;  // constant chain
    std::vector<double> autocorr;  // lags 1..stored
};

/// Effective sample size via the initial-positive-sequence truncation of the
/// autocovariance (pairwise sums kept while positive).
double effective_sample_size(const Eigen::VectorXd& draws);

std::vector<ParameterSummary> chain_summary(const ChainOutput& chain, int max_lag = 20);

struct MixingComparison {
    std::vector<std::string> names;  // parameters common to both chains
    std::vector<double> ess_first;
    std::vector<double> ess_second;
    std::vector<double> ratio;  // first / second
    Eigen::MatrixXd trace_first;   // kept x |names| trace export
    Eigen::MatrixXd trace_second;
};

/// Per-parameter ESS ratio between two chains fitted on the same data with
/// different spline parameterizations. Throws on mismatched run shapes.
MixingComparison compare_mixing(const ChainOutput& chain_a, const ChainOutput& chain_b);

}  // namespace lcsae
