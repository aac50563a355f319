#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "lcsae/data.hpp"
#include "lcsae/model.hpp"
#include "lcsae/rng.hpp"

namespace lcsae {

struct SimulateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Known smooth age effect used by the generator (age is standardized to
/// [-1, 1] over the configured range before evaluation).
enum class SmoothKind { zero, linear, logistic, quadratic };

struct SmoothSpec {
    SmoothKind kind = SmoothKind::zero;
    double scale = 1.0;      // amplitude
    double steepness = 6.0;  // logistic slope on the standardized age

    double eval(double u) const;  // u in [-1, 1]
};

SmoothKind parse_smooth(const std::string& s);
const char* smooth_label(SmoothKind k);

/// Generative ground truth: class-conditional item probabilities, membership
/// parameters (spline coefficients unused; the smooth f and the district
/// effects v below replace them), and the population layout.
struct TruthSpec {
    ItemSchema schema;
    ItemProbTable theta;  // C x T
    Link link = Link::proportional_odds;
    int n_classes = 3;
    bool use_marital = false;
    std::vector<double> cutpoints;      // PO: C-1, increasing
    std::vector<double> alpha0;         // logit: per equation
    std::vector<double> alpha1;         // per equation (PO: size 1)
    std::vector<Eigen::Vector3d> gamma;  // per equation, used when use_marital
    std::vector<SmoothSpec> smooth;     // per equation
    std::vector<Eigen::VectorXd> v;     // per equation, one entry per district

    int n_districts = 4;
    AgeClassMap age_classes{51, {65, 80}};
    int age_min = 51;
    int age_max = 100;
    double base_cell_count = 50.0;  // population per (age, sex, marital, district) cell
    int n_units = 2000;

    int n_eq() const { return link == Link::proportional_odds ? 1 : n_classes - 1; }
    void validate() const;

    /// Standardize an age to [-1, 1] over [age_min, age_max].
    double std_age(double age) const {
        return 2.0 * (age - age_min) / (age_max - age_min) - 1.0;
    }
    /// True shared predictor of equation e at a covariate point.
    double predictor(int e, const CovariateVector& cov, int district) const;
    /// True membership probabilities at a covariate point.
    Eigen::VectorXd class_probs(const CovariateVector& cov, int district) const;
};

struct SimulatedData {
    ItemResponseMatrix responses;
    PopulationCellTable cells;
    Eigen::MatrixXd true_counts;  // J x C expected class counts per small area
};

/// Forward sample: enumerate population cells over (age, sex, marital if
/// used, district), draw each unit's cell proportional to its population,
/// its class from the true membership probabilities, and its responses from
/// theta. true_counts holds the population-weighted class probabilities the
/// count estimator targets.
SimulatedData simulate_dataset(const TruthSpec& truth, std::uint64_t seed);

/// A conventional 3-class truth used across the test-suite simulations:
/// T items with the given category counts, classes separated in severity,
/// alpha1 = -1, logistic smooth, modest district effects.
TruthSpec default_truth(int n_classes, const std::vector<int>& item_categories, int n_units,
                        SmoothKind smooth = SmoothKind::logistic);

}  // namespace lcsae
