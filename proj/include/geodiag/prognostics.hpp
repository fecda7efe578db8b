#pragma once

// Marker-vs-OOD correlation tables and the standard-error gap rule that
// predicts which of two models transfers better.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "error.hpp"
#include "markers.hpp"

namespace geodiag {

// ---------------------------------------------------------------------------
// Pearson correlation

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
    double t = 0.0;
    std::size_t n = 0;
};

// Sample correlation with a two-sided p-value from Student's t, df = n - 2.
inline PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), ErrorCode::DimensionMismatch, "series lengths differ");
    require(x.size() >= 3, ErrorCode::InvalidArgument, "pearson needs n >= 3");
    const auto n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0 && syy > 0.0, ErrorCode::ConstantSeries, "constant input series");
    PearsonResult res;
    res.n = n;
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    const double one_minus = 1.0 - res.r * res.r;
    if (one_minus <= 0.0) {
        res.t = std::copysign(std::numeric_limits<double>::infinity(), res.r);
        res.p_value = 0.0;
        return res;
    }
    res.t = res.r * std::sqrt(df / one_minus);
    const boost::math::students_t dist(df);
    res.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t))));
    return res;
}

// Asterisk count: p <= 0.05, 0.01, 0.001, 0.0001.
inline int significance_stars(double p) {
    if (p <= 0.0001) return 4;
    if (p <= 0.001) return 3;
    if (p <= 0.01) return 2;
    if (p <= 0.05) return 1;
    return 0;
}

// ---------------------------------------------------------------------------
// Correlation table

struct RunRecord {
    std::string run_id;
    MarkerReport markers;
    std::map<std::string, double> ood_accuracies;
};

inline RunRecord run_record_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorCode::InvalidArgument, "run record must be a JSON object");
    require(j.contains("ood_accuracies") && j["ood_accuracies"].is_object(), ErrorCode::InvalidArgument,
            "run record lacks 'ood_accuracies'");
    RunRecord r;
    r.run_id = j.value("run_id", "");
    r.markers = marker_report_from_json(j.contains("markers") && j["markers"].contains("markers") ? j["markers"] : j);
    for (const auto& [k, v] : j["ood_accuracies"].items()) {
        require(v.is_number(), ErrorCode::InvalidArgument, "ood accuracy '" + k + "' is not a number");
        r.ood_accuracies[k] = v.get<double>();
    }
    require(!r.markers.markers.empty() && !r.ood_accuracies.empty(), ErrorCode::InvalidArgument,
            "run record '" + r.run_id + "' needs at least one marker and one OOD accuracy");
    return r;
}

inline nlohmann::json to_json(const RunRecord& r) {
    return {{"run_id", r.run_id}, {"markers", to_json(r.markers)}, {"ood_accuracies", r.ood_accuracies}};
}

struct CorrelationCell {
    std::string marker;
    std::string setting;
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    int stars = 0;
};

struct CorrelationTable {
    std::vector<CorrelationCell> cells; // setting-major, both axes sorted by name
    std::vector<std::string> markers;
    std::vector<std::string> settings;
    std::vector<std::string> warnings;
};

// One cell per (marker, setting) over all records. A cell is omitted with a
// warning when some record lacks a finite value for it, when fewer than 3
// records exist, or when either series is constant.
inline CorrelationTable build_table(const std::vector<RunRecord>& records) {
    CorrelationTable t;
    std::set<std::string> markers, settings;
    for (const auto& r : records) {
        for (const auto& [m, v] : r.markers.markers) markers.insert(m);
        for (const auto& [s, v] : r.ood_accuracies) settings.insert(s);
    }
    t.markers.assign(markers.begin(), markers.end());
    t.settings.assign(settings.begin(), settings.end());
    if (records.size() < 3) {
        t.warnings.push_back("only " + std::to_string(records.size()) + " records; need >= 3 for correlations");
        return t;
    }
    for (const auto& s : t.settings) {
        for (const auto& m : t.markers) {
            std::vector<double> x, y;
            std::size_t missing = 0;
            for (const auto& r : records) {
                const auto mi = r.markers.markers.find(m);
                const auto si = r.ood_accuracies.find(s);
                if (mi == r.markers.markers.end() || si == r.ood_accuracies.end() || !std::isfinite(mi->second.value) ||
                    !std::isfinite(si->second)) {
                    ++missing;
                    continue;
                }
                x.push_back(mi->second.value);
                y.push_back(si->second);
            }
            if (missing > 0) {
                t.warnings.push_back(m + " / " + s + ": dropped, " + std::to_string(missing) + " records lack a value");
                continue;
            }
            try {
                const auto pr = pearson(x, y);
                t.cells.push_back({m, s, pr.r, pr.p_value, pr.n, significance_stars(pr.p_value)});
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ConstantSeries) throw;
                t.warnings.push_back(m + " / " + s + ": dropped, constant series");
            }
        }
    }
    return t;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string table_csv(const CorrelationTable& t) {
    std::string out = "marker,setting,r,p,stars,n\n";
    for (const auto& c : t.cells)
        out += c.marker + "," + c.setting + "," + format_double(c.r) + "," + format_double(c.p_value) + "," +
               std::to_string(c.stars) + "," + std::to_string(c.n) + "\n";
    return out;
}

// Rows = settings, cols = markers; null where a cell was dropped.
inline nlohmann::json heatmap_json(const CorrelationTable& t) {
    std::map<std::pair<std::string, std::string>, const CorrelationCell*> at;
    for (const auto& c : t.cells) at[{c.setting, c.marker}] = &c;
    nlohmann::json r = nlohmann::json::array(), p = nlohmann::json::array(), stars = nlohmann::json::array();
    for (const auto& s : t.settings) {
        nlohmann::json rr = nlohmann::json::array(), pr = nlohmann::json::array(), sr = nlohmann::json::array();
        for (const auto& m : t.markers) {
            const auto it = at.find({s, m});
            if (it == at.end()) {
                rr.push_back(nullptr);
                pr.push_back(nullptr);
                sr.push_back(nullptr);
            } else {
                rr.push_back(it->second->r);
                pr.push_back(it->second->p_value);
                sr.push_back(it->second->stars);
            }
        }
        r.push_back(rr);
        p.push_back(pr);
        stars.push_back(sr);
    }
    return {{"rows", t.settings}, {"cols", t.markers}, {"r", r}, {"p", p}, {"stars", stars}, {"warnings", t.warnings}};
}

// ---------------------------------------------------------------------------
// Verdicts

enum class Direction { HigherBetter, LowerBetter };

inline std::string to_string(Direction d) { return d == Direction::HigherBetter ? "higher_better" : "lower_better"; }

inline Direction parse_direction(const std::string& s) {
    if (s == "higher_better" || s == "higher") return Direction::HigherBetter;
    if (s == "lower_better" || s == "lower") return Direction::LowerBetter;
    throw Error(ErrorCode::InvalidArgument, "unknown direction '" + s + "'");
}

struct DecisionMarker {
    std::string name;
    Direction direction = Direction::HigherBetter;
};

inline std::vector<DecisionMarker> default_decision_markers() {
    return {{"d_eff", Direction::HigherBetter}, {"psi_eff", Direction::HigherBetter}};
}

enum class Outcome { A, B, NoVerdict };

inline std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::A: return "A";
    case Outcome::B: return "B";
    case Outcome::NoVerdict: return "NoVerdict";
    }
    return "NoVerdict";
}

struct MarkerGap {
    std::string marker;
    Direction direction = Direction::HigherBetter;
    double value_a = 0.0;
    double value_b = 0.0;
    double delta = 0.0;  // favorable gap of A over B (sign follows direction)
    double se_sum = 0.0;
};

struct Verdict {
    Outcome outcome = Outcome::NoVerdict;
    std::vector<MarkerGap> gaps;
};

// A iff every marker's favorable gap of A over B strictly exceeds the sum of
// the two standard errors; B by the mirrored condition; otherwise no verdict.
inline Verdict predict_pair(const MarkerReport& a, const MarkerReport& b,
                            const std::vector<DecisionMarker>& decision = default_decision_markers()) {
    require(!decision.empty(), ErrorCode::InvalidArgument, "no decision markers");
    Verdict v;
    bool all_a = true, all_b = true;
    for (const auto& d : decision) {
        const auto ia = a.markers.find(d.name);
        const auto ib = b.markers.find(d.name);
        require(ia != a.markers.end(), ErrorCode::MissingMarker, "report A lacks '" + d.name + "'");
        require(ib != b.markers.end(), ErrorCode::MissingMarker, "report B lacks '" + d.name + "'");
        require(ia->second.se.has_value(), ErrorCode::MissingStderr, "report A has no stderr for '" + d.name + "'");
        require(ib->second.se.has_value(), ErrorCode::MissingStderr, "report B has no stderr for '" + d.name + "'");
        MarkerGap g;
        g.marker = d.name;
        g.direction = d.direction;
        g.value_a = ia->second.value;
        g.value_b = ib->second.value;
        const double raw = g.value_a - g.value_b;
        g.delta = d.direction == Direction::HigherBetter ? raw : -raw;
        g.se_sum = *ia->second.se + *ib->second.se;
        all_a = all_a && g.delta > g.se_sum;
        all_b = all_b && -g.delta > g.se_sum;
        v.gaps.push_back(g);
    }
    v.outcome = all_a ? Outcome::A : all_b ? Outcome::B : Outcome::NoVerdict;
    return v;
}

inline Verdict single_marker_predict(const MarkerReport& a, const MarkerReport& b, const std::string& marker,
                                     Direction direction) {
    return predict_pair(a, b, {{marker, direction}});
}

inline nlohmann::json to_json(const Verdict& v) {
    nlohmann::json gaps = nlohmann::json::array();
    for (const auto& g : v.gaps)
        gaps.push_back({{"marker", g.marker},
                        {"direction", to_string(g.direction)},
                        {"value_a", detail::num_or_null(g.value_a)},
                        {"value_b", detail::num_or_null(g.value_b)},
                        {"delta", detail::num_or_null(g.delta)},
                        {"se_sum", detail::num_or_null(g.se_sum)}});
    return {{"outcome", to_string(v.outcome)}, {"gaps", gaps}};
}

// ---------------------------------------------------------------------------
// Scoring

struct ScoreCounts {
    std::size_t correct = 0;
    std::size_t total = 0;      // pairs with a verdict
    std::size_t ties = 0;       // equal OOD accuracy, counted as incorrect
    std::size_t no_verdict = 0; // pairs skipped for lack of a verdict
};

struct PredictionScore {
    ScoreCounts overall;
    std::map<std::string, ScoreCounts> per_dataset;
    std::optional<double> accuracy; // absent when total == 0
};

// ood maps (model, dataset) to (accuracy of A, accuracy of B).
inline PredictionScore score_predictions(const std::map<std::string, Verdict>& verdicts,
                                         const std::map<std::pair<std::string, std::string>, std::pair<double, double>>& ood) {
    PredictionScore s;
    for (const auto& [key, acc] : ood) {
        const auto& [model, dataset] = key;
        ScoreCounts& d = s.per_dataset[dataset];
        const auto it = verdicts.find(model);
        if (it == verdicts.end() || it->second.outcome == Outcome::NoVerdict) {
            ++s.overall.no_verdict;
            ++d.no_verdict;
            continue;
        }
        ++s.overall.total;
        ++d.total;
        if (acc.first == acc.second) {
            ++s.overall.ties;
            ++d.ties;
            continue;
        }
        const bool a_wins = acc.first > acc.second;
        if (a_wins == (it->second.outcome == Outcome::A)) {
            ++s.overall.correct;
            ++d.correct;
        }
    }
    if (s.overall.total > 0) s.accuracy = static_cast<double>(s.overall.correct) / static_cast<double>(s.overall.total);
    return s;
}

inline nlohmann::json to_json(const ScoreCounts& c) {
    return {{"correct", c.correct}, {"total", c.total}, {"ties", c.ties}, {"no_verdict", c.no_verdict}};
}

inline nlohmann::json to_json(const PredictionScore& s) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [k, c] : s.per_dataset) per[k] = to_json(c);
    nlohmann::json out{{"counts", to_json(s.overall)}, {"per_dataset", per}};
    if (s.accuracy) out["accuracy"] = *s.accuracy;
    return out;
}

} // namespace geodiag
