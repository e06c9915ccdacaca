#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/dataset.hpp"
#include "tsrnet/signal.hpp"
#include "tsrnet/wfdb.hpp"

namespace tsrnet {

namespace csv {

// RFC4180-ish: quoted fields may contain commas and doubled quotes.
inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("csv: missing column '" + name + "'");
    }
};

inline Table read_table(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("csv: cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: empty file " + path.string());
    t.header = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

} // namespace csv

// Keys of a python-style dict literal such as {'NORM': 100.0, 'SR': 0.0}.
inline std::vector<std::string> parse_scp_codes(const std::string& field) {
    std::vector<std::string> codes;
    std::size_t i = 0;
    while (i < field.size()) {
        if (field[i] == '\'' || field[i] == '"') {
            const char q = field[i];
            const auto end = field.find(q, i + 1);
            if (end == std::string::npos) break;
            codes.push_back(field.substr(i + 1, end - i - 1));
            // skip past the value to the next key
            const auto comma = field.find(',', end);
            i = comma == std::string::npos ? field.size() : comma + 1;
        } else {
            ++i;
        }
    }
    return codes;
}

struct PtbxlRule {
    bool strict_norm = true;       // NORM superclass and nothing else
    int train_fold_max = 8;        // folds 1..8 train, the rest test
};

struct PtbxlLoadStats {
    int n_train = 0;
    int n_test_normal = 0;
    int n_test_abnormal = 0;
    int n_skipped = 0;
};

// Builds the normal-only train / mixed test split from a PTB-XL tree:
// ptbxl_database.csv + scp_statements.csv + the 100 Hz record files.
// Records with unresolvable SCP codes or unreadable files are skipped with a
// warning, never silently mislabeled.
inline DatasetSplit load_ptbxl_split(const std::filesystem::path& root,
                                     const PtbxlRule& rule = {},
                                     PtbxlLoadStats* stats_out = nullptr,
                                     std::ostream& log = std::cerr) {
    const auto meta_path = root / "ptbxl_database.csv";
    if (!std::filesystem::exists(meta_path))
        throw std::runtime_error("ptbxl: missing metadata table " + meta_path.string());
    const auto scp_path = root / "scp_statements.csv";
    if (!std::filesystem::exists(scp_path))
        throw std::runtime_error("ptbxl: missing statement table " + scp_path.string());

    // code -> diagnostic superclass (only diagnostic statements carry one)
    const csv::Table scp = csv::read_table(scp_path);
    const int scp_diag = scp.column("diagnostic");
    const int scp_class = scp.column("diagnostic_class");
    std::map<std::string, std::string> superclass;
    for (const auto& row : scp.rows) {
        if (row.empty() || row[0].empty()) continue;
        const bool diagnostic = !row[static_cast<std::size_t>(scp_diag)].empty() &&
                                std::stod(row[static_cast<std::size_t>(scp_diag)]) != 0.0;
        superclass[row[0]] = diagnostic ? row[static_cast<std::size_t>(scp_class)] : "";
    }

    const csv::Table meta = csv::read_table(meta_path);
    const int col_codes = meta.column("scp_codes");
    const int col_fold = meta.column("strat_fold");
    const int col_file = meta.column("filename_lr");
    const int col_id = meta.column("ecg_id");

    DatasetSplit split;
    split.provenance = Provenance::ptbxl;
    PtbxlLoadStats stats;

    for (const auto& row : meta.rows) {
        const std::string& id = row[static_cast<std::size_t>(col_id)];
        try {
            std::set<std::string> classes;
            bool resolvable = true;
            for (const auto& code : parse_scp_codes(row[static_cast<std::size_t>(col_codes)])) {
                auto it = superclass.find(code);
                if (it == superclass.end()) {
                    log << "ptbxl: record " << id << ": unresolvable SCP code '" << code
                        << "', skipping record\n";
                    resolvable = false;
                    break;
                }
                if (!it->second.empty()) classes.insert(it->second);
            }
            if (!resolvable) {
                ++stats.n_skipped;
                continue;
            }
            const bool is_normal = rule.strict_norm
                                       ? (classes.size() == 1 && classes.count("NORM") == 1)
                                       : classes.count("NORM") == 1;
            const int fold = std::stoi(row[static_cast<std::size_t>(col_fold)]);

            EcgRecord rec = read_wfdb(root / (row[static_cast<std::size_t>(col_file)] + ".hea"));
            rec.record_id = id;
            rec.label = is_normal ? Label::normal : Label::abnormal;
            if (fold <= rule.train_fold_max) {
                if (is_normal) {
                    split.train.push_back(std::move(rec));
                    ++stats.n_train;
                }
                // abnormal records in the training folds are unused
            } else {
                if (is_normal) ++stats.n_test_normal; else ++stats.n_test_abnormal;
                split.test.push_back(std::move(rec));
            }
        } catch (const std::exception& e) {
            log << "ptbxl: record " << id << ": " << e.what() << ", skipping record\n";
            ++stats.n_skipped;
        }
    }
    if (stats_out) *stats_out = stats;
    split.validate();
    return split;
}

} // namespace tsrnet
