#include "terse/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>

#include "terse/error.hpp"

namespace terse {

dimension parse_dimension(std::string_view name) {
    if (name == "model") return dimension::model;
    if (name == "dataset") return dimension::dataset;
    if (name == "strategy") return dimension::strategy;
    throw error("unknown group-by dimension: " + std::string(name));
}

std::vector<dimension> parse_dimensions(std::string_view list) {
    std::vector<dimension> out;
    while (!list.empty()) {
        auto comma = list.find(',');
        auto item = list.substr(0, comma);
        if (!item.empty()) out.push_back(parse_dimension(item));
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
    }
    return out;
}

namespace {

// Sorting first makes the sum independent of scorecard order.
double mean_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

struct group_acc {
    std::size_t n = 0;
    std::size_t failed = 0;
    std::size_t undefined_ratio = 0;
    std::vector<double> target, generated, ratio, p, r, f, energy;
};

}  // namespace

std::vector<summary_row> aggregate(const std::vector<score_card>& cards, const std::vector<dimension>& by) {
    auto has = [&by](dimension d) { return std::find(by.begin(), by.end(), d) != by.end(); };
    const bool by_model = has(dimension::model);
    const bool by_dataset = has(dimension::dataset);
    const bool by_strategy = has(dimension::strategy);

    std::map<std::tuple<std::string, std::string, std::string>, group_acc> groups;
    for (const auto& c : cards) {
        auto& g = groups[{by_model ? c.model : std::string(any_value),
                          by_dataset ? c.dataset : std::string(any_value),
                          by_strategy ? c.strategy : std::string(any_value)}];
        ++g.n;
        if (!c.ok()) {
            ++g.failed;
            continue;
        }
        g.target.push_back(static_cast<double>(c.target_length));
        g.generated.push_back(static_cast<double>(c.generated_length));
        if (c.length_ratio) {
            g.ratio.push_back(*c.length_ratio);
        } else {
            ++g.undefined_ratio;
        }
        g.p.push_back(c.rouge.precision);
        g.r.push_back(c.rouge.recall);
        g.f.push_back(c.rouge.f1);
        if (c.energy_mwh) g.energy.push_back(*c.energy_mwh);
    }

    std::vector<summary_row> rows;
    for (auto& [key, g] : groups) {
        summary_row row;
        std::tie(row.model, row.dataset, row.strategy) = key;
        row.n_samples = g.n;
        row.failed = g.failed;
        row.exclusion_count = g.failed + g.undefined_ratio;
        if (!g.target.empty()) {
            row.mean_target_length = mean_of(g.target);
            row.mean_generated_length = mean_of(g.generated);
            row.rouge = {mean_of(g.p), mean_of(g.r), mean_of(g.f)};
            row.ratio_of_means = length_ratio(row.mean_generated_length, row.mean_target_length);
        }
        if (!g.ratio.empty()) row.mean_length_ratio = mean_of(g.ratio);
        if (!g.energy.empty()) row.mean_energy_mwh = mean_of(g.energy);
        rows.push_back(std::move(row));
    }
    return rows;
}

report_format parse_report_format(std::string_view name) {
    if (name == "markdown_table" || name == "markdown" || name == "md") return report_format::markdown_table;
    if (name == "csv") return report_format::csv;
    throw error("unknown report format: " + std::string(name));
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string s(buf);
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char ch : value) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        switch (ch) {
            case '"':
                quoted = true;
                any = true;
                break;
            case ',':
                fields.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !field.empty()) {
                    fields.push_back(std::move(field));
                    records.push_back(std::move(fields));
                }
                field.clear();
                fields.clear();
                any = false;
                break;
            default:
                field += ch;
                any = true;
        }
    }
    if (quoted) throw error("unterminated quoted CSV field");
    if (any || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    return records;
}

namespace {

const std::vector<std::string> columns = {
    "model",           "dataset",          "strategy",          "n_samples",     "failed",
    "exclusion_count", "mean_target_length", "mean_generated_length", "mean_length_ratio",
    "ratio_of_means",  "rouge_precision",  "rouge_recall",      "rouge_f1",      "mean_energy_mwh"};

std::string opt3(const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string(); }

std::vector<std::string> cells(const summary_row& r) {
    return {r.model,
            r.dataset,
            r.strategy,
            std::to_string(r.n_samples),
            std::to_string(r.failed),
            std::to_string(r.exclusion_count),
            format_fixed(r.mean_target_length, 1),
            format_fixed(r.mean_generated_length, 1),
            opt3(r.mean_length_ratio),
            opt3(r.ratio_of_means),
            format_fixed(r.rouge.precision, 3),
            format_fixed(r.rouge.recall, 3),
            format_fixed(r.rouge.f1, 3),
            opt3(r.mean_energy_mwh)};
}

std::string md_cell(std::string_view v) {
    std::string out;
    for (char ch : v) {
        if (ch == '|') out += '\\';
        out += ch == '\n' ? ' ' : ch;
    }
    return out;
}

// Columns before `text_columns` are left-aligned in markdown, the rest right-aligned.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& body,
                  report_format format, std::size_t text_columns) {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        if (format == report_format::csv) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i) out += ',';
                out += csv_field(fields[i]);
            }
        } else {
            out += '|';
            for (const auto& f : fields) out += ' ' + md_cell(f) + " |";
        }
        out += '\n';
    };
    line(header);
    if (format == report_format::markdown_table) {
        out += '|';
        for (std::size_t i = 0; i < header.size(); ++i) out += i < text_columns ? " --- |" : " ---: |";
        out += '\n';
    }
    for (const auto& r : body) line(r);
    return out;
}

std::optional<double> opt_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

std::string render(const std::vector<summary_row>& rows, report_format format) {
    if (rows.empty()) throw empty_report();
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& r : rows) body.push_back(cells(r));
    return table(columns, body, format, 3);
}

std::vector<summary_row> parse_csv(std::string_view text) {
    auto records = split_csv(text);
    if (records.empty() || records.front() != columns) throw error("not a summary CSV: header mismatch");
    std::vector<summary_row> rows;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& f = records[i];
        if (f.size() != columns.size()) {
            throw error("summary CSV line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) +
                        " fields");
        }
        try {
            summary_row r;
            r.model = f[0];
            r.dataset = f[1];
            r.strategy = f[2];
            r.n_samples = std::stoul(f[3]);
            r.failed = std::stoul(f[4]);
            r.exclusion_count = std::stoul(f[5]);
            r.mean_target_length = std::stod(f[6]);
            r.mean_generated_length = std::stod(f[7]);
            r.mean_length_ratio = opt_number(f[8]);
            r.ratio_of_means = opt_number(f[9]);
            r.rouge = {std::stod(f[10]), std::stod(f[11]), std::stod(f[12])};
            r.mean_energy_mwh = opt_number(f[13]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw error("summary CSV line " + std::to_string(i + 1) + " has a malformed number");
        }
    }
    return rows;
}

std::string format_percent(double fraction) { return format_fixed(fraction * 100.0, 1) + "%"; }

std::vector<reduction_row> reduction_vs_default(const std::vector<summary_row>& rows) {
    auto is_default = [](const summary_row& r) {
        std::string s = r.strategy;
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s == "default";
    };
    std::map<std::pair<std::string, std::string>, const summary_row*> baseline;
    for (const auto& r : rows) {
        if (is_default(r)) baseline[{r.model, r.dataset}] = &r;
    }
    std::vector<reduction_row> out;
    for (const auto& r : rows) {
        if (is_default(r)) continue;
        auto it = baseline.find({r.model, r.dataset});
        if (it == baseline.end()) throw missing_baseline("no default row for " + r.model + "/" + r.dataset);
        const auto& base = *it->second;
        if (!(base.mean_generated_length > 0)) {
            throw missing_baseline("default mean length is 0 for " + r.model + "/" + r.dataset);
        }
        reduction_row red{r.model, r.dataset, r.strategy,
                          1.0 - r.mean_generated_length / base.mean_generated_length, std::nullopt};
        if (r.mean_energy_mwh && base.mean_energy_mwh && *base.mean_energy_mwh > 0) {
            red.energy_reduction = 1.0 - *r.mean_energy_mwh / *base.mean_energy_mwh;
        }
        out.push_back(std::move(red));
    }
    return out;
}

std::string render_reductions(const std::vector<reduction_row>& rows, report_format format) {
    if (rows.empty()) throw empty_report();
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        body.push_back({r.model, r.dataset, r.strategy, format_percent(r.length_reduction),
                        r.energy_reduction ? format_percent(*r.energy_reduction) : std::string()});
    }
    return table({"model", "dataset", "strategy", "length_reduction", "energy_reduction"}, body, format, 3);
}

std::string render_length_table(const std::vector<summary_row>& rows, report_format format) {
    if (rows.empty()) throw empty_report();
    std::set<std::string> models;
    std::map<std::string, std::map<std::string, double>> generated;
    std::map<std::string, std::pair<double, double>> target;  // weighted sum, weight
    for (const auto& r : rows) {
        const auto included = static_cast<double>(r.n_samples - r.failed);
        if (included <= 0) continue;
        models.insert(r.model);
        generated[r.dataset][r.model] = r.mean_generated_length;
        target[r.dataset].first += r.mean_target_length * included;
        target[r.dataset].second += included;
    }
    if (generated.empty()) throw empty_report();
    std::vector<std::string> header = {"dataset", "target"};
    header.insert(header.end(), models.begin(), models.end());
    std::vector<std::vector<std::string>> body;
    for (const auto& [dataset, per_model] : generated) {
        std::vector<std::string> line = {dataset,
                                         format_fixed(target[dataset].first / target[dataset].second, 1)};
        for (const auto& m : models) {
            auto it = per_model.find(m);
            line.push_back(it == per_model.end() ? std::string() : format_fixed(it->second, 1));
        }
        body.push_back(std::move(line));
    }
    return table(header, body, format, 1);
}

std::string render_distribution_csv(const std::map<std::string, category_distribution>& dist) {
    std::string out = "group,category,fraction\n";
    for (const auto& [group, d] : dist) {
        for (const auto& [c, frac] : d) {
            out += csv_field(group) + ',' + std::string(to_string(c)) + ',' + format_fixed(frac, 4) + '\n';
        }
    }
    return out;
}

}  // namespace terse
