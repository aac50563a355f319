#include "lcsae/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lcsae {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back("");
    return out;
}

int parse_int(const std::string& s, const std::string& what, int row) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("row " + std::to_string(row) + ": cannot parse " + what + " from '" + s + "'");
    }
}

double parse_double(const std::string& s, const std::string& what, int row) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("row " + std::to_string(row) + ": cannot parse " + what + " from '" + s + "'");
    }
}

int parse_sex(const std::string& s, int row) {
    if (s == "F") return 0;
    if (s == "M") return 1;
    throw DataError("row " + std::to_string(row) + ": sex must be F or M, got '" + s + "'");
}

}  // namespace

const char* marital_label(Marital m) {
    switch (m) {
        case Marital::single: return "single";
        case Marital::married: return "married";
        case Marital::separated: return "separated";
        case Marital::widow: return "widow";
    }
    return "?";
}

Marital parse_marital(const std::string& s) {
    if (s == "single") return Marital::single;
    if (s == "married") return Marital::married;
    if (s == "separated") return Marital::separated;
    if (s == "widow") return Marital::widow;
    throw DataError("unknown marital status '" + s + "'");
}

void ItemSchema::validate() const {
    if (items.empty()) throw DataError("item schema is empty");
    std::set<std::string> names;
    for (const auto& it : items) {
        if (it.categories < 2)
            throw DataError("item '" + it.name + "' has " + std::to_string(it.categories) +
                            " categories; at least 2 required");
        if (!names.insert(it.name).second) throw DataError("duplicate item name '" + it.name + "'");
    }
}

int AgeClassMap::age_class(int age) const {
    int c = 0;
    for (int b : breaks)
        if (age >= b) ++c;
    return c;
}

std::vector<int> ItemResponseMatrix::area_counts() const {
    std::vector<int> n_j(n_areas(), 0);
    for (const auto& u : units) ++n_j[u.small_area - 1];
    return n_j;
}

std::vector<double> PopulationCellTable::area_totals() const {
    std::vector<double> tot(n_areas(), 0.0);
    for (const auto& c : cells) tot[c.small_area - 1] += c.count;
    return tot;
}

CovariateVector encode_covariates(const UnitRecord& unit) {
    CovariateVector cov;
    cov.age = static_cast<double>(unit.age);
    cov.sex = static_cast<double>(unit.sex);
    int m = static_cast<int>(unit.marital);
    if (m > 0) cov.marital[m - 1] = 1.0;
    return cov;
}

CovariateVector encode_covariates(const PopulationCell& cell) {
    UnitRecord u;
    u.age = cell.age;
    u.sex = cell.sex;
    u.marital = cell.marital;
    return encode_covariates(u);
}

ItemResponseMatrix load_responses(const std::filesystem::path& path, const ItemSchema& schema,
                                  const AgeClassMap& age_classes, int n_districts) {
    schema.validate();
    if (n_districts < 1) throw DataError("district count must be positive");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open responses file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("responses file is empty: " + path.string());
    auto header = split_csv(line);
    const int T = schema.item_count();
    std::vector<std::string> expected = {"age", "sex", "marital", "district"};
    for (const auto& it : schema.items) expected.push_back(it.name);
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw DataError("responses header mismatch; expected '" + want + "'");
    }

    ItemResponseMatrix data;
    data.schema = schema;
    data.n_districts = n_districts;
    data.age_classes = age_classes;

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (static_cast<int>(f.size()) != 4 + T)
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(4 + T) +
                            " fields, got " + std::to_string(f.size()));
        UnitRecord u;
        u.age = parse_int(f[0], "age", row);
        if (u.age < age_classes.min_age)
            throw DataError("row " + std::to_string(row) + ": age " + std::to_string(u.age) +
                            " below study minimum " + std::to_string(age_classes.min_age));
        u.sex = parse_sex(f[1], row);
        try {
            u.marital = parse_marital(f[2]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        u.district = parse_int(f[3], "district", row);
        if (u.district < 1 || u.district > n_districts)
            throw DataError("row " + std::to_string(row) + ": unknown district id " +
                            std::to_string(u.district));
        u.responses.resize(T);
        for (int t = 0; t < T; ++t) {
            int code = parse_int(f[4 + t], "item '" + schema.items[t].name + "'", row);
            if (code < 1 || code > schema.items[t].categories)
                throw DataError("row " + std::to_string(row) + ": item '" + schema.items[t].name +
                                "' code " + std::to_string(code) + " outside 1.." +
                                std::to_string(schema.items[t].categories));
            u.responses[t] = code;
        }
        u.small_area = small_area_of(u.district, u.age, age_classes);
        data.units.push_back(std::move(u));
    }
    if (data.units.empty()) throw DataError("no units in responses file: " + path.string());
    return data;
}

void save_responses(const std::filesystem::path& path, const ItemResponseMatrix& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write responses file: " + path.string());
    out << "age,sex,marital,district";
    for (const auto& it : data.schema.items) out << ',' << it.name;
    out << '\n';
    for (const auto& u : data.units) {
        out << u.age << ',' << (u.sex ? 'M' : 'F') << ',' << marital_label(u.marital) << ','
            << u.district;
        for (int code : u.responses) out << ',' << code;
        out << '\n';
    }
}

PopulationCellTable load_population_cells(const std::filesystem::path& path,
                                          const AgeClassMap& age_classes, int n_districts) {
    if (n_districts < 1) throw DataError("district count must be positive");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cells file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("cells file is empty: " + path.string());
    auto header = split_csv(line);
    std::vector<std::string> expected = {"age", "sex", "marital", "district", "count"};
    if (header != expected)
        throw DataError("cells header mismatch; expected 'age,sex,marital,district,count'");

    PopulationCellTable table;
    table.n_districts = n_districts;
    table.age_classes = age_classes;
    std::set<std::tuple<int, int, int, int>> seen;

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 5)
            throw DataError("row " + std::to_string(row) + ": expected 5 fields, got " +
                            std::to_string(f.size()));
        PopulationCell c;
        c.age = parse_int(f[0], "age", row);
        c.sex = parse_sex(f[1], row);
        try {
            c.marital = parse_marital(f[2]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        c.district = parse_int(f[3], "district", row);
        if (c.district < 1 || c.district > n_districts)
            throw DataError("row " + std::to_string(row) + ": unknown district id " +
                            std::to_string(c.district));
        c.count = parse_double(f[4], "count", row);
        if (c.count < 0)
            throw DataError("row " + std::to_string(row) + ": negative population count");
        if (!seen.insert({c.age, c.sex, static_cast<int>(c.marital), c.district}).second)
            throw DataError("row " + std::to_string(row) + ": duplicate cell key (" + f[0] + "," +
                            f[1] + "," + f[2] + "," + f[3] + ")");
        c.small_area = small_area_of(c.district, c.age, age_classes);
        table.cells.push_back(c);
    }
    return table;
}

void save_population_cells(const std::filesystem::path& path, const PopulationCellTable& cells) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cells file: " + path.string());
    out << "age,sex,marital,district,count\n";
    for (const auto& c : cells.cells) {
        out << c.age << ',' << (c.sex ? 'M' : 'F') << ',' << marital_label(c.marital) << ','
            << c.district << ',' << c.count << '\n';
    }
}

ValidationReport validate_dataset(const ItemResponseMatrix& data, const PopulationCellTable& cells) {
    ValidationReport rep;
    const int A = data.age_classes.n_classes();
    rep.area_sample_sizes.assign(data.n_districts, std::vector<int>(A, 0));
    for (const auto& u : data.units)
        ++rep.area_sample_sizes[u.district - 1][data.age_classes.age_class(u.age)];

    for (int d = 0; d < data.n_districts; ++d)
        for (int a = 0; a < A; ++a)
            if (rep.area_sample_sizes[d][a] == 0)
                rep.warnings.push_back("small area (district " + std::to_string(d + 1) +
                                       ", age class " + std::to_string(a + 1) +
                                       ") has no sample units");

    // covariate levels present in the population but absent from the sample
    std::set<std::pair<int, int>> sample_levels, cell_levels;  // (sex, marital)
    std::set<int> sample_districts, cell_districts;
    for (const auto& u : data.units) {
        sample_levels.insert({u.sex, static_cast<int>(u.marital)});
        sample_districts.insert(u.district);
    }
    for (const auto& c : cells.cells) {
        if (c.count <= 0) continue;
        cell_levels.insert({c.sex, static_cast<int>(c.marital)});
        cell_districts.insert(c.district);
    }
    for (const auto& [sex, m] : cell_levels)
        if (!sample_levels.count({sex, m}))
            rep.warnings.push_back(std::string("covariate level (sex=") + (sex ? "M" : "F") +
                                   ", marital=" + marital_label(static_cast<Marital>(m)) +
                                   ") present in population cells but absent from the sample");
    for (int d : cell_districts)
        if (!sample_districts.count(d))
            rep.warnings.push_back("district " + std::to_string(d) +
                                   " has population cells but no sampled units");
    for (int d : sample_districts)
        if (!cell_districts.count(d))
            rep.warnings.push_back("district " + std::to_string(d) +
                                   " has sampled units but no population cells");
    return rep;
}

}  // namespace lcsae
