#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcsae {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Marital { single = 0, married = 1, separated = 2, widow = 3 };

const char* marital_label(Marital m);
Marital parse_marital(const std::string& s);

/// Ordered item list with per-item category counts.
struct ItemSchema {
    struct Item {
        std::string name;
        int categories = 0;  // H_t >= 2
    };
    std::vector<Item> items;

    int item_count() const { return static_cast<int>(items.size()); }
    void validate() const;  // throws DataError on duplicate names, H_t < 2, empty list
};

/// Age-class partition used to form small areas as district x age-class cells.
/// `breaks` are interior lower bounds: classes are [min_age, b0), [b0, b1), ..., [b_last, +inf).
struct AgeClassMap {
    int min_age = 0;
    std::vector<int> breaks;

    int n_classes() const { return static_cast<int>(breaks.size()) + 1; }
    int age_class(int age) const;  // 0-based
};

struct UnitRecord {
    std::vector<int> responses;  // codes 1..H_t
    int age = 0;
    int sex = 0;  // 0 = female (reference), 1 = male
    Marital marital = Marital::single;
    int district = 0;    // 1..D
    int small_area = 0;  // 1..J, derived from (district, age class)
};

inline int small_area_of(int district, int age, const AgeClassMap& ac) {
    return (district - 1) * ac.n_classes() + ac.age_class(age) + 1;
}

struct ItemResponseMatrix {
    ItemSchema schema;
    std::vector<UnitRecord> units;
    int n_districts = 0;
    AgeClassMap age_classes;

    int n_units() const { return static_cast<int>(units.size()); }
    int n_areas() const { return n_districts * age_classes.n_classes(); }
    std::vector<int> area_counts() const;  // n_j, indexed 0..J-1
};

struct PopulationCell {
    int age = 0;
    int sex = 0;
    Marital marital = Marital::single;
    int district = 0;
    int small_area = 0;
    double count = 0.0;  // N_l >= 0
};

struct PopulationCellTable {
    std::vector<PopulationCell> cells;
    int n_districts = 0;
    AgeClassMap age_classes;

    int n_cells() const { return static_cast<int>(cells.size()); }
    int n_areas() const { return n_districts * age_classes.n_classes(); }
    /// Total population per small area (index 0..J-1).
    std::vector<double> area_totals() const;
};

/// Dummy coding against the reference categories (female, single).
struct CovariateVector {
    double age = 0.0;
    double sex = 0.0;
    std::array<double, 3> marital{0.0, 0.0, 0.0};  // married, separated, widow
};

CovariateVector encode_covariates(const UnitRecord& unit);
CovariateVector encode_covariates(const PopulationCell& cell);

struct ValidationReport {
    std::vector<std::string> warnings;
    // district x age-class sample sizes, Table-1 shaped: counts[d][a]
    std::vector<std::vector<int>> area_sample_sizes;
};

/// Columns: age,sex,marital,district,<item1>..<itemT>. sex in {F,M},
/// marital in {single,married,separated,widow}. Throws DataError with the
/// offending row number on malformed or out-of-range input.
ItemResponseMatrix load_responses(const std::filesystem::path& path, const ItemSchema& schema,
                                  const AgeClassMap& age_classes, int n_districts);
void save_responses(const std::filesystem::path& path, const ItemResponseMatrix& data);

/// Columns: age,sex,marital,district,count. Duplicate keys and negative
/// counts are errors.
PopulationCellTable load_population_cells(const std::filesystem::path& path,
                                          const AgeClassMap& age_classes, int n_districts);
void save_population_cells(const std::filesystem::path& path, const PopulationCellTable& cells);

ValidationReport validate_dataset(const ItemResponseMatrix& data, const PopulationCellTable& cells);

}  // namespace lcsae
