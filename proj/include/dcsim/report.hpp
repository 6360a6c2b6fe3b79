#pragma once

#include "dcsim/orchestration.hpp"
#include "dcsim/scenario.hpp"

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dcsim {

enum class ReportFormat { Csv, Json };

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline ReportFormat parseReportFormat(std::string_view name)
{
    if (name == "csv") {
        return ReportFormat::Csv;
    }
    if (name == "json") {
        return ReportFormat::Json;
    }
    throw UsageError("unsupported output format '" + std::string(name) + "' (expected csv or json)");
}

/// Locale-independent fixed-point rendering with six decimals.
inline std::string fixed6(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    if (ec != std::errc{}) {
        throw std::range_error("number too large to render");
    }
    std::string s(buf, end);
    if (s == "-0.000000") {
        s.erase(0, 1);
    }
    return s;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1aHex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

struct ResultsMetadata {
    std::string scenarioName;
    std::string scenarioHash;
    std::uint64_t seed = 1;
    std::string arrivalKind;
    std::string arrivalInterpretation; ///< "mean" or "rate"
    double arrivalMeanSeconds = 0.0;
    std::string placementConfig;
    std::string virtConfig;
    bool overheadEnabled = true;
    std::int64_t payloadBytes = 0;
    double energyJoules = 0.0;
    double finalClock = 0.0;
};

struct ResultsDocument {
    ResultsMetadata metadata;
    ResultSet results;
};

inline ResultsDocument makeResultsDocument(const Scenario& sc, std::uint64_t seed, const RunOutput& run)
{
    ResultsDocument doc;
    auto& m = doc.metadata;
    m.scenarioName = sc.name;
    m.scenarioHash = fnv1aHex(writeScenario(sc));
    m.seed = seed;
    m.arrivalKind = sc.arrivals.kind;
    m.arrivalInterpretation = sc.arrivals.meanSeconds ? "mean" : "rate";
    m.arrivalMeanSeconds = sc.arrivals.scaleSeconds();
    m.placementConfig = sc.deployment ? sc.deployment->placement : "explicit";
    m.virtConfig = sc.deployment ? sc.deployment->virt : "explicit";
    m.overheadEnabled = sc.overheadEnabled;
    for (const auto& e : sc.workflow.edges) {
        m.payloadBytes += e.payloadBytes;
    }
    m.energyJoules = run.energyJoules;
    m.finalClock = run.finalClock;
    doc.results = run.results;
    return doc;
}

namespace detail {

inline std::string jsonString(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                static constexpr char hex[] = "0123456789abcdef";
                out += "\\u00";
                out += hex[(c >> 4) & 0xF];
                out += hex[c & 0xF];
            } else {
                out += c;
            }
        }
    }
    out += '"';
    return out;
}

inline std::string csvField(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline constexpr std::string_view kCsvHeader =
    "activation_id,release_s,finish_s,makespan_s,deadline_outcome,placement_config,virt_config,payload_bytes,seed";

inline std::string toCsv(const ResultsDocument& doc)
{
    const auto& m = doc.metadata;
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : doc.results.records) {
        out += std::to_string(r.activationId);
        out += ',' + fixed6(r.releaseTime);
        out += ',' + fixed6(r.finishTime);
        out += ',' + fixed6(r.makespanSeconds);
        out += ',';
        out += toString(r.deadlineOutcome);
        out += ',' + detail::csvField(m.placementConfig);
        out += ',' + detail::csvField(m.virtConfig);
        out += ',' + std::to_string(m.payloadBytes);
        out += ',' + std::to_string(m.seed);
        out += '\n';
    }
    return out;
}

inline std::string toJson(const ResultsDocument& doc)
{
    using detail::jsonString;
    const auto& m = doc.metadata;
    const auto& s = doc.results.summary;
    std::string out = "{\n  \"metadata\": {\n";
    out += "    \"scenario\": " + jsonString(m.scenarioName) + ",\n";
    out += "    \"scenario_hash\": " + jsonString(m.scenarioHash) + ",\n";
    out += "    \"seed\": " + std::to_string(m.seed) + ",\n";
    out += "    \"arrival_kind\": " + jsonString(m.arrivalKind) + ",\n";
    out += "    \"arrival_parameter\": " + jsonString(m.arrivalInterpretation) + ",\n";
    out += "    \"arrival_mean_s\": " + fixed6(m.arrivalMeanSeconds) + ",\n";
    out += "    \"placement_config\": " + jsonString(m.placementConfig) + ",\n";
    out += "    \"virt_config\": " + jsonString(m.virtConfig) + ",\n";
    out += std::string("    \"overhead_enabled\": ") + (m.overheadEnabled ? "true" : "false") + ",\n";
    out += "    \"payload_bytes\": " + std::to_string(m.payloadBytes) + ",\n";
    out += "    \"energy_j\": " + fixed6(m.energyJoules) + ",\n";
    out += "    \"final_clock_s\": " + fixed6(m.finalClock) + "\n  },\n";
    out += "  \"records\": [";
    const auto& recs = doc.results.records;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        out += i == 0 ? "\n" : ",\n";
        out += "    {\"activation_id\": " + std::to_string(r.activationId);
        out += ", \"release_s\": " + fixed6(r.releaseTime);
        out += ", \"finish_s\": " + fixed6(r.finishTime);
        out += ", \"makespan_s\": " + fixed6(r.makespanSeconds);
        out += ", \"deadline_outcome\": " + jsonString(toString(r.deadlineOutcome));
        out += ", \"placement_config\": " + jsonString(m.placementConfig);
        out += ", \"virt_config\": " + jsonString(m.virtConfig);
        out += ", \"payload_bytes\": " + std::to_string(m.payloadBytes);
        out += ", \"seed\": " + std::to_string(m.seed) + "}";
    }
    out += recs.empty() ? "],\n" : "\n  ],\n";
    out += "  \"summary\": {\"count\": " + std::to_string(s.count);
    out += ", \"min_s\": " + fixed6(s.min);
    out += ", \"median_s\": " + fixed6(s.median);
    out += ", \"max_s\": " + fixed6(s.max);
    out += ", \"ecdf\": [";
    for (std::size_t i = 0; i < s.ecdf.size(); ++i) {
        out += i == 0 ? "" : ", ";
        out += "[" + fixed6(s.ecdf[i].first) + ", " + fixed6(s.ecdf[i].second) + "]";
    }
    out += "]}\n}\n";
    return out;
}

inline std::string reportResults(const ResultsDocument& doc, ReportFormat format)
{
    return format == ReportFormat::Csv ? toCsv(doc) : toJson(doc);
}

} // namespace dcsim
