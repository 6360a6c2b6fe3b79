#pragma once

#include "dcsim/engine.hpp"
#include "dcsim/network.hpp"
#include "dcsim/orchestration.hpp"
#include "dcsim/placement.hpp"
#include "dcsim/resources.hpp"
#include "dcsim/scheduling.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcsim {

// ---------------------------------------------------------------------------
// Scenario model. Field names mirror the file keys.

struct HostsDef {
    int count = 4;
    double clkRateHz = 2.6e9;
    double ipc = 3.0;
    int pes = 4;
    std::int64_t ramMB = 16384;
    double bwBps = 4e9;
    double idleWatts = 100.0;
    double maxWatts = 250.0;

    friend bool operator==(const HostsDef&, const HostsDef&) = default;
};

struct SwitchDef {
    std::string id;
    std::string level = "tor"; ///< tor | aggregate
    double forwardingDelaySeconds = 0.0;

    friend bool operator==(const SwitchDef&, const SwitchDef&) = default;
};

struct LinkDef {
    std::string a;
    std::string b;
    double bwBps = 1e9;

    friend bool operator==(const LinkDef&, const LinkDef&) = default;
};

struct GuestDef {
    std::string id;
    std::string kind = "vm"; ///< vm | container
    std::string host;        ///< physical host name, or empty
    std::string parent;      ///< hosting VM id, or empty
    int pes = 1;
    std::optional<double> mips; ///< per PE; derived from the host clock when absent
    std::int64_t ramMB = 1024;
    double bwBps = 1e9;
    double overheadSeconds = 0.0;
    std::string cloudletScheduler; ///< empty: scenario default

    friend bool operator==(const GuestDef&, const GuestDef&) = default;
};

struct TaskDef {
    std::string id;
    double lengthMI = 0.0;
    int pes = 1;

    friend bool operator==(const TaskDef&, const TaskDef&) = default;
};

struct EdgeDef {
    std::string from;
    std::string to;
    std::int64_t payloadBytes = 0;

    friend bool operator==(const EdgeDef&, const EdgeDef&) = default;
};

struct WorkflowDef {
    std::vector<TaskDef> tasks;
    std::vector<EdgeDef> edges;
    std::optional<double> deadlineSeconds;

    friend bool operator==(const WorkflowDef&, const WorkflowDef&) = default;
};

/// Shorthand for the case-study deployments: virtualization V (VM), C
/// (container on host) or N (container on VM), and placement I (one guest),
/// II (host0 + host1, same rack) or III (host0 + host2, other rack).
struct DeploymentDef {
    std::string virt = "V";
    std::string placement = "I";
    double vmOverheadSeconds = 5.0;
    double containerOverheadSeconds = 3.0;
    int guestPes = 1;
    std::int64_t guestRamMB = 1024;
    double guestBwBps = 1e9;

    friend bool operator==(const DeploymentDef&, const DeploymentDef&) = default;
};

struct ArrivalDef {
    std::string kind = "fixed"; ///< exponential | fixed
    std::optional<double> meanSeconds;
    std::optional<double> rate;
    int count = 1;
    std::optional<std::uint64_t> seed;

    /// Mean inter-arrival time, whichever way it was given.
    double scaleSeconds() const { return meanSeconds ? *meanSeconds : 1.0 / rate.value_or(1.0); }

    friend bool operator==(const ArrivalDef&, const ArrivalDef&) = default;
};

struct Scenario {
    std::string name;
    HostsDef hosts;
    std::vector<SwitchDef> switches;
    std::vector<LinkDef> links;
    std::optional<DeploymentDef> deployment;
    std::vector<GuestDef> guests;
    std::map<std::string, std::string> placement; ///< task id -> guest id
    WorkflowDef workflow;
    ArrivalDef arrivals;
    std::string cloudletScheduler = "time_shared";
    std::string guestScheduler = "time_shared";
    std::string allocationPolicy = "first_fit";
    bool overheadEnabled = true;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline std::string hostName(int index) { return "host" + std::to_string(index); }

// ---------------------------------------------------------------------------
// Errors

class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors))
    {
    }

    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors)
    {
        std::string out;
        for (const auto& e : errors) {
            if (!out.empty()) {
                out += '\n';
            }
            out += e;
        }
        return out;
    }

    std::vector<std::string> errors_;
};

class ScenarioParseError : public ScenarioError {
public:
    ScenarioParseError(std::size_t line, std::size_t column, const std::string& what)
        : ScenarioError({"parse error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                         what}),
          line_(line),
          column_(column)
    {
    }

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

using nlohmann::json;

/// Reads typed fields and collects every problem instead of stopping at the first.
class FieldReader {
public:
    explicit FieldReader(std::vector<std::string>& errors) : errors_(errors) {}

    /// Reports keys of `obj` outside `known`.
    void allowOnly(const json& obj, const std::string& path, std::initializer_list<const char*> known)
    {
        for (const auto& [key, value] : obj.items()) {
            bool ok = false;
            for (const char* k : known) {
                ok = ok || key == k;
            }
            if (!ok) {
                errors_.push_back(path + ": unknown field '" + key + "'");
            }
        }
    }

    bool object(const json& j, const std::string& path)
    {
        if (!j.is_object()) {
            errors_.push_back(path + ": expected an object");
            return false;
        }
        return true;
    }

    template <class T>
    void get(const json& obj, const char* key, T& out, const std::string& path, bool required = false)
    {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) {
                errors_.push_back(path + "." + key + ": missing required field");
            }
            return;
        }
        convert(*it, out, path + "." + key);
    }

    template <class T>
    void get(const json& obj, const char* key, std::optional<T>& out, const std::string& path)
    {
        auto it = obj.find(key);
        if (it == obj.end()) {
            return;
        }
        T value{};
        if (convert(*it, value, path + "." + key)) {
            out = value;
        }
    }

    void error(std::string message) { errors_.push_back(std::move(message)); }

private:
    bool convert(const json& j, double& out, const std::string& path)
    {
        if (!j.is_number()) {
            return typeError(path, "a number");
        }
        out = j.get<double>();
        return true;
    }
    bool convert(const json& j, int& out, const std::string& path)
    {
        if (!j.is_number_integer()) {
            return typeError(path, "an integer");
        }
        out = j.get<int>();
        return true;
    }
    bool convert(const json& j, std::int64_t& out, const std::string& path)
    {
        if (!j.is_number_integer()) {
            return typeError(path, "an integer");
        }
        out = j.get<std::int64_t>();
        return true;
    }
    bool convert(const json& j, std::uint64_t& out, const std::string& path)
    {
        if (!j.is_number_unsigned()) {
            return typeError(path, "a non-negative integer");
        }
        out = j.get<std::uint64_t>();
        return true;
    }
    bool convert(const json& j, bool& out, const std::string& path)
    {
        if (!j.is_boolean()) {
            return typeError(path, "a boolean");
        }
        out = j.get<bool>();
        return true;
    }
    bool convert(const json& j, std::string& out, const std::string& path)
    {
        if (!j.is_string()) {
            return typeError(path, "a string");
        }
        out = j.get<std::string>();
        return true;
    }

    bool typeError(const std::string& path, const char* expected)
    {
        errors_.push_back(path + ": expected " + expected);
        return false;
    }

    std::vector<std::string>& errors_;
};

inline std::pair<std::size_t, std::size_t> lineColumn(const std::string& text, std::size_t byte)
{
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline bool isSchedulerName(const std::string& s)
{
    return s == "time_shared" || s == "space_shared" || s == "space_shared_serial";
}

inline Scenario readScenario(const json& root, std::vector<std::string>& errors)
{
    FieldReader r(errors);
    Scenario sc;
    if (!r.object(root, "scenario")) {
        return sc;
    }
    r.allowOnly(root, "scenario",
                {"name", "hosts", "network", "deployment", "guests", "placement", "workflow", "arrivals", "schedulers",
                 "allocation_policy", "overhead_enabled"});
    r.get(root, "name", sc.name, "scenario");

    if (auto it = root.find("hosts"); it == root.end()) {
        r.error("scenario.hosts: missing required section");
    } else if (r.object(*it, "hosts")) {
        const auto& h = *it;
        r.allowOnly(h, "hosts", {"count", "clk_rate_hz", "ipc", "pes", "ram_mb", "bw_bps", "idle_watts", "max_watts"});
        r.get(h, "count", sc.hosts.count, "hosts", true);
        r.get(h, "clk_rate_hz", sc.hosts.clkRateHz, "hosts", true);
        r.get(h, "ipc", sc.hosts.ipc, "hosts", true);
        r.get(h, "pes", sc.hosts.pes, "hosts");
        r.get(h, "ram_mb", sc.hosts.ramMB, "hosts");
        r.get(h, "bw_bps", sc.hosts.bwBps, "hosts");
        r.get(h, "idle_watts", sc.hosts.idleWatts, "hosts");
        r.get(h, "max_watts", sc.hosts.maxWatts, "hosts");
    }

    if (auto it = root.find("network"); it != root.end() && r.object(*it, "network")) {
        const auto& n = *it;
        r.allowOnly(n, "network", {"switches", "links"});
        if (auto sw = n.find("switches"); sw != n.end()) {
            if (!sw->is_array()) {
                r.error("network.switches: expected an array");
            } else {
                for (std::size_t i = 0; i < sw->size(); ++i) {
                    const std::string path = "network.switches[" + std::to_string(i) + "]";
                    if (!r.object((*sw)[i], path)) {
                        continue;
                    }
                    r.allowOnly((*sw)[i], path, {"id", "level", "forwarding_delay_s"});
                    SwitchDef d;
                    r.get((*sw)[i], "id", d.id, path, true);
                    r.get((*sw)[i], "level", d.level, path);
                    r.get((*sw)[i], "forwarding_delay_s", d.forwardingDelaySeconds, path);
                    sc.switches.push_back(d);
                }
            }
        }
        if (auto ln = n.find("links"); ln != n.end()) {
            if (!ln->is_array()) {
                r.error("network.links: expected an array");
            } else {
                for (std::size_t i = 0; i < ln->size(); ++i) {
                    const std::string path = "network.links[" + std::to_string(i) + "]";
                    if (!r.object((*ln)[i], path)) {
                        continue;
                    }
                    r.allowOnly((*ln)[i], path, {"a", "b", "bw_bps"});
                    LinkDef d;
                    r.get((*ln)[i], "a", d.a, path, true);
                    r.get((*ln)[i], "b", d.b, path, true);
                    r.get((*ln)[i], "bw_bps", d.bwBps, path);
                    sc.links.push_back(d);
                }
            }
        }
    }

    if (auto it = root.find("deployment"); it != root.end() && r.object(*it, "deployment")) {
        const auto& d = *it;
        r.allowOnly(d, "deployment",
                    {"virt", "placement", "vm_overhead_s", "container_overhead_s", "guest_pes", "guest_ram_mb",
                     "guest_bw_bps"});
        DeploymentDef dep;
        r.get(d, "virt", dep.virt, "deployment", true);
        r.get(d, "placement", dep.placement, "deployment", true);
        r.get(d, "vm_overhead_s", dep.vmOverheadSeconds, "deployment");
        r.get(d, "container_overhead_s", dep.containerOverheadSeconds, "deployment");
        r.get(d, "guest_pes", dep.guestPes, "deployment");
        r.get(d, "guest_ram_mb", dep.guestRamMB, "deployment");
        r.get(d, "guest_bw_bps", dep.guestBwBps, "deployment");
        sc.deployment = dep;
    }

    if (auto it = root.find("guests"); it != root.end()) {
        if (!it->is_array()) {
            r.error("guests: expected an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string path = "guests[" + std::to_string(i) + "]";
                const auto& g = (*it)[i];
                if (!r.object(g, path)) {
                    continue;
                }
                r.allowOnly(g, path,
                            {"id", "kind", "host", "parent", "pes", "mips", "ram_mb", "bw_bps", "overhead_s",
                             "cloudlet_scheduler"});
                GuestDef d;
                r.get(g, "id", d.id, path, true);
                r.get(g, "kind", d.kind, path);
                r.get(g, "host", d.host, path);
                r.get(g, "parent", d.parent, path);
                r.get(g, "pes", d.pes, path);
                r.get(g, "mips", d.mips, path);
                r.get(g, "ram_mb", d.ramMB, path);
                r.get(g, "bw_bps", d.bwBps, path);
                r.get(g, "overhead_s", d.overheadSeconds, path);
                r.get(g, "cloudlet_scheduler", d.cloudletScheduler, path);
                sc.guests.push_back(d);
            }
        }
    }

    if (auto it = root.find("placement"); it != root.end() && r.object(*it, "placement")) {
        for (const auto& [task, guest] : it->items()) {
            if (!guest.is_string()) {
                r.error("placement." + task + ": expected a guest id string");
            } else {
                sc.placement[task] = guest.get<std::string>();
            }
        }
    }

    if (auto it = root.find("workflow"); it == root.end()) {
        r.error("scenario.workflow: missing required section");
    } else if (r.object(*it, "workflow")) {
        const auto& w = *it;
        r.allowOnly(w, "workflow", {"tasks", "edges", "deadline_s"});
        r.get(w, "deadline_s", sc.workflow.deadlineSeconds, "workflow");
        if (auto ts = w.find("tasks"); ts == w.end() || !ts->is_array()) {
            r.error("workflow.tasks: expected an array");
        } else {
            for (std::size_t i = 0; i < ts->size(); ++i) {
                const std::string path = "workflow.tasks[" + std::to_string(i) + "]";
                if (!r.object((*ts)[i], path)) {
                    continue;
                }
                r.allowOnly((*ts)[i], path, {"id", "length_mi", "pes"});
                TaskDef t;
                r.get((*ts)[i], "id", t.id, path, true);
                r.get((*ts)[i], "length_mi", t.lengthMI, path, true);
                r.get((*ts)[i], "pes", t.pes, path);
                sc.workflow.tasks.push_back(t);
            }
        }
        if (auto es = w.find("edges"); es != w.end()) {
            if (!es->is_array()) {
                r.error("workflow.edges: expected an array");
            } else {
                for (std::size_t i = 0; i < es->size(); ++i) {
                    const std::string path = "workflow.edges[" + std::to_string(i) + "]";
                    if (!r.object((*es)[i], path)) {
                        continue;
                    }
                    r.allowOnly((*es)[i], path, {"from", "to", "payload_bytes"});
                    EdgeDef e;
                    r.get((*es)[i], "from", e.from, path, true);
                    r.get((*es)[i], "to", e.to, path, true);
                    r.get((*es)[i], "payload_bytes", e.payloadBytes, path, true);
                    sc.workflow.edges.push_back(e);
                }
            }
        }
    }

    if (auto it = root.find("arrivals"); it != root.end() && r.object(*it, "arrivals")) {
        const auto& a = *it;
        r.allowOnly(a, "arrivals", {"kind", "mean_s", "rate", "count", "seed"});
        r.get(a, "kind", sc.arrivals.kind, "arrivals");
        r.get(a, "mean_s", sc.arrivals.meanSeconds, "arrivals");
        r.get(a, "rate", sc.arrivals.rate, "arrivals");
        r.get(a, "count", sc.arrivals.count, "arrivals");
        r.get(a, "seed", sc.arrivals.seed, "arrivals");
    }

    if (auto it = root.find("schedulers"); it != root.end() && r.object(*it, "schedulers")) {
        r.allowOnly(*it, "schedulers", {"cloudlet", "guest"});
        r.get(*it, "cloudlet", sc.cloudletScheduler, "schedulers");
        r.get(*it, "guest", sc.guestScheduler, "schedulers");
    }
    r.get(root, "allocation_policy", sc.allocationPolicy, "scenario");
    r.get(root, "overhead_enabled", sc.overheadEnabled, "scenario");
    return sc;
}

} // namespace detail

/// Semantic checks; returns every problem found.
inline std::vector<std::string> validateScenario(const Scenario& sc)
{
    std::vector<std::string> errs;
    const auto& h = sc.hosts;
    if (h.count < 1) {
        errs.push_back("hosts.count: must be at least 1");
    }
    if (!(h.clkRateHz > 0.0) || !(h.ipc > 0.0)) {
        errs.push_back("hosts: clk_rate_hz and ipc must be positive");
    }
    if (h.pes < 1) {
        errs.push_back("hosts.pes: must be at least 1");
    }
    if (h.ramMB < 0 || !(h.bwBps >= 0.0)) {
        errs.push_back("hosts: ram_mb and bw_bps must be non-negative");
    }
    if (!(h.idleWatts >= 0.0) || !(h.maxWatts >= h.idleWatts)) {
        errs.push_back("hosts: power needs 0 <= idle_watts <= max_watts");
    }

    std::set<std::string> nodes;
    for (int i = 0; i < h.count; ++i) {
        nodes.insert(hostName(i));
    }
    for (const auto& s : sc.switches) {
        if (s.id.empty()) {
            continue;
        }
        if (!nodes.insert(s.id).second) {
            errs.push_back("network.switches: duplicate node id '" + s.id + "'");
        }
        if (s.level != "tor" && s.level != "aggregate") {
            errs.push_back("network.switches['" + s.id + "'].level: must be 'tor' or 'aggregate'");
        }
        if (!(s.forwardingDelaySeconds >= 0.0)) {
            errs.push_back("network.switches['" + s.id + "'].forwarding_delay_s: must be non-negative");
        }
    }
    for (std::size_t i = 0; i < sc.links.size(); ++i) {
        const auto& l = sc.links[i];
        const std::string path = "network.links[" + std::to_string(i) + "]";
        for (const auto* end : {&l.a, &l.b}) {
            if (nodes.count(*end) == 0) {
                errs.push_back(path + ": unknown node '" + *end + "'");
            }
        }
        if (l.a == l.b) {
            errs.push_back(path + ": link joins a node to itself");
        }
        if (!(l.bwBps > 0.0)) {
            errs.push_back(path + ".bw_bps: must be positive");
        }
    }

    // Workflow.
    std::set<std::string> taskIds;
    for (const auto& t : sc.workflow.tasks) {
        if (!taskIds.insert(t.id).second) {
            errs.push_back("workflow.tasks: duplicate task id '" + t.id + "'");
        }
        if (!(t.lengthMI >= 0.0)) {
            errs.push_back("workflow.tasks['" + t.id + "'].length_mi: must be non-negative");
        }
        if (t.pes < 1) {
            errs.push_back("workflow.tasks['" + t.id + "'].pes: must be at least 1");
        }
    }
    if (sc.workflow.tasks.empty()) {
        errs.push_back("workflow.tasks: at least one task is required");
    }
    bool edgesOk = true;
    for (const auto& e : sc.workflow.edges) {
        if (taskIds.count(e.from) == 0 || taskIds.count(e.to) == 0) {
            errs.push_back("workflow.edges: edge " + e.from + " -> " + e.to + " references an unknown task");
            edgesOk = false;
        }
        if (e.payloadBytes < 0) {
            errs.push_back("workflow.edges: payload_bytes must be non-negative");
        }
    }
    if (sc.workflow.deadlineSeconds && !(*sc.workflow.deadlineSeconds >= 0.0)) {
        errs.push_back("workflow.deadline_s: must be non-negative");
    }
    if (edgesOk && errs.empty()) {
        WorkflowDag dag;
        std::map<std::string, std::size_t> index;
        for (const auto& t : sc.workflow.tasks) {
            index[t.id] = dag.tasks.size();
            dag.tasks.push_back(TaskTemplate{t.id, t.lengthMI, t.pes});
        }
        for (const auto& e : sc.workflow.edges) {
            dag.edges.push_back(DataEdge{index[e.from], index[e.to], e.payloadBytes});
        }
        try {
            dag.validate();
        } catch (const ConfigurationError& ex) {
            errs.push_back(std::string("workflow: ") + ex.what());
        }
    }

    // Guests and mapping.
    if (sc.deployment && (!sc.guests.empty() || !sc.placement.empty())) {
        errs.push_back("deployment: cannot be combined with explicit guests/placement");
    }
    if (!sc.deployment && sc.guests.empty()) {
        errs.push_back("scenario: needs either a deployment or explicit guests");
    }
    if (sc.deployment) {
        const auto& d = *sc.deployment;
        if (d.virt != "V" && d.virt != "C" && d.virt != "N") {
            errs.push_back("deployment.virt: must be V, C or N");
        }
        if (d.placement != "I" && d.placement != "II" && d.placement != "III") {
            errs.push_back("deployment.placement: must be I, II or III");
        }
        if (h.count < 3) {
            errs.push_back("deployment: placement shorthand needs at least 3 hosts (host0, host1, host2)");
        }
        if (!(d.vmOverheadSeconds >= 0.0) || !(d.containerOverheadSeconds >= 0.0)) {
            errs.push_back("deployment: overheads must be non-negative");
        }
        if (d.guestPes < 1 || d.guestRamMB < 0 || !(d.guestBwBps >= 0.0)) {
            errs.push_back("deployment: guest_pes >= 1, guest_ram_mb and guest_bw_bps >= 0 required");
        }
    }
    std::map<std::string, const GuestDef*> guestIds;
    for (const auto& g : sc.guests) {
        if (!guestIds.emplace(g.id, &g).second) {
            errs.push_back("guests: duplicate guest id '" + g.id + "'");
        }
    }
    for (const auto& g : sc.guests) {
        const std::string path = "guests['" + g.id + "']";
        if (g.kind != "vm" && g.kind != "container") {
            errs.push_back(path + ".kind: must be 'vm' or 'container'");
        }
        if (!g.host.empty() && !g.parent.empty()) {
            errs.push_back(path + ": give either host or parent, not both");
        }
        if (!g.host.empty() && (g.host.rfind("host", 0) != 0 || nodes.count(g.host) == 0)) {
            errs.push_back(path + ".host: unknown host '" + g.host + "'");
        }
        if (!g.parent.empty()) {
            auto it = guestIds.find(g.parent);
            if (it == guestIds.end()) {
                errs.push_back(path + ".parent: unknown guest '" + g.parent + "'");
            } else if (it->second->kind != "vm") {
                errs.push_back(path + ".parent: '" + g.parent + "' is a container and cannot host guests");
            }
        }
        if (g.pes < 1 || (g.mips && !(*g.mips > 0.0))) {
            errs.push_back(path + ": pes >= 1 and mips > 0 required");
        }
        if (g.ramMB < 0 || !(g.bwBps >= 0.0) || !(g.overheadSeconds >= 0.0)) {
            errs.push_back(path + ": ram_mb, bw_bps and overhead_s must be non-negative");
        }
        if (!g.cloudletScheduler.empty() && !detail::isSchedulerName(g.cloudletScheduler)) {
            errs.push_back(path + ".cloudlet_scheduler: unknown scheduler '" + g.cloudletScheduler + "'");
        }
    }
    // Parent chains must end at a host.
    for (const auto& g : sc.guests) {
        std::set<std::string> seen{g.id};
        const GuestDef* cur = &g;
        while (!cur->parent.empty()) {
            auto it = guestIds.find(cur->parent);
            if (it == guestIds.end()) {
                break;
            }
            if (!seen.insert(it->first).second) {
                errs.push_back("guests['" + g.id + "']: parent chain forms a cycle");
                break;
            }
            cur = it->second;
        }
    }
    if (!sc.guests.empty()) {
        for (const auto& t : sc.workflow.tasks) {
            if (sc.placement.count(t.id) == 0) {
                errs.push_back("placement: task '" + t.id + "' is not mapped to a guest");
            }
        }
        for (const auto& [task, guest] : sc.placement) {
            if (taskIds.count(task) == 0) {
                errs.push_back("placement: unknown task '" + task + "'");
            }
            if (guestIds.count(guest) == 0) {
                errs.push_back("placement['" + task + "']: unknown guest '" + guest + "'");
            }
        }
    }

    // Arrivals.
    const auto& a = sc.arrivals;
    if (a.kind != "exponential" && a.kind != "fixed") {
        errs.push_back("arrivals.kind: must be 'exponential' or 'fixed'");
    }
    if (a.meanSeconds && a.rate) {
        errs.push_back("arrivals: give either mean_s or rate, not both");
    }
    if (a.meanSeconds && !(*a.meanSeconds > 0.0)) {
        errs.push_back("arrivals.mean_s: must be positive");
    }
    if (a.rate && !(*a.rate > 0.0)) {
        errs.push_back("arrivals.rate: must be positive");
    }
    if (!a.meanSeconds && !a.rate && a.count > 1) {
        errs.push_back("arrivals: mean_s or rate is required for more than one activation");
    }
    if (a.count < 1) {
        errs.push_back("arrivals.count: must be at least 1");
    }

    if (!detail::isSchedulerName(sc.cloudletScheduler)) {
        errs.push_back("schedulers.cloudlet: unknown scheduler '" + sc.cloudletScheduler + "'");
    }
    if (sc.guestScheduler != "time_shared") {
        errs.push_back("schedulers.guest: only 'time_shared' is supported");
    }
    if (!isKnownSelectionPolicy(sc.allocationPolicy)) {
        errs.push_back("allocation_policy: unknown policy '" + sc.allocationPolicy + "'");
    }
    return errs;
}

/// Parses and validates scenario text. Throws ScenarioParseError (with line
/// and column) or ScenarioError listing every problem.
inline Scenario parseScenario(const std::string& text)
{
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = detail::lineColumn(text, e.byte);
        std::string what = e.what();
        if (auto p = what.find("parse error"); p != std::string::npos) {
            what = what.substr(p);
        }
        throw ScenarioParseError(line, column, what);
    }
    std::vector<std::string> errors;
    Scenario sc = detail::readScenario(root, errors);
    if (errors.empty()) {
        errors = validateScenario(sc);
    } else {
        for (auto& e : validateScenario(sc)) {
            errors.push_back(std::move(e));
        }
    }
    if (!errors.empty()) {
        throw ScenarioError(std::move(errors));
    }
    return sc;
}

inline Scenario loadScenario(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScenarioError({"cannot open scenario file '" + path + "'"});
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseScenario(buf.str());
}

/// Serializes a scenario in the same layout loadScenario reads.
inline std::string writeScenario(const Scenario& sc)
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["name"] = sc.name;
    j["hosts"] = {{"count", sc.hosts.count},       {"clk_rate_hz", sc.hosts.clkRateHz},
                  {"ipc", sc.hosts.ipc},           {"pes", sc.hosts.pes},
                  {"ram_mb", sc.hosts.ramMB},      {"bw_bps", sc.hosts.bwBps},
                  {"idle_watts", sc.hosts.idleWatts}, {"max_watts", sc.hosts.maxWatts}};
    ordered_json switches = ordered_json::array();
    for (const auto& s : sc.switches) {
        switches.push_back({{"id", s.id}, {"level", s.level}, {"forwarding_delay_s", s.forwardingDelaySeconds}});
    }
    ordered_json links = ordered_json::array();
    for (const auto& l : sc.links) {
        links.push_back({{"a", l.a}, {"b", l.b}, {"bw_bps", l.bwBps}});
    }
    j["network"] = {{"switches", switches}, {"links", links}};
    if (sc.deployment) {
        const auto& d = *sc.deployment;
        j["deployment"] = {{"virt", d.virt},
                           {"placement", d.placement},
                           {"vm_overhead_s", d.vmOverheadSeconds},
                           {"container_overhead_s", d.containerOverheadSeconds},
                           {"guest_pes", d.guestPes},
                           {"guest_ram_mb", d.guestRamMB},
                           {"guest_bw_bps", d.guestBwBps}};
    }
    if (!sc.guests.empty()) {
        ordered_json guests = ordered_json::array();
        for (const auto& g : sc.guests) {
            ordered_json gj{{"id", g.id}, {"kind", g.kind}};
            if (!g.host.empty()) {
                gj["host"] = g.host;
            }
            if (!g.parent.empty()) {
                gj["parent"] = g.parent;
            }
            gj["pes"] = g.pes;
            if (g.mips) {
                gj["mips"] = *g.mips;
            }
            gj["ram_mb"] = g.ramMB;
            gj["bw_bps"] = g.bwBps;
            gj["overhead_s"] = g.overheadSeconds;
            if (!g.cloudletScheduler.empty()) {
                gj["cloudlet_scheduler"] = g.cloudletScheduler;
            }
            guests.push_back(gj);
        }
        j["guests"] = guests;
        ordered_json placement = ordered_json::object();
        for (const auto& [task, guest] : sc.placement) {
            placement[task] = guest;
        }
        j["placement"] = placement;
    }
    ordered_json tasks = ordered_json::array();
    for (const auto& t : sc.workflow.tasks) {
        tasks.push_back({{"id", t.id}, {"length_mi", t.lengthMI}, {"pes", t.pes}});
    }
    ordered_json edges = ordered_json::array();
    for (const auto& e : sc.workflow.edges) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"payload_bytes", e.payloadBytes}});
    }
    j["workflow"] = {{"tasks", tasks}, {"edges", edges}};
    if (sc.workflow.deadlineSeconds) {
        j["workflow"]["deadline_s"] = *sc.workflow.deadlineSeconds;
    }
    ordered_json arrivals{{"kind", sc.arrivals.kind}};
    if (sc.arrivals.meanSeconds) {
        arrivals["mean_s"] = *sc.arrivals.meanSeconds;
    }
    if (sc.arrivals.rate) {
        arrivals["rate"] = *sc.arrivals.rate;
    }
    arrivals["count"] = sc.arrivals.count;
    if (sc.arrivals.seed) {
        arrivals["seed"] = *sc.arrivals.seed;
    }
    j["arrivals"] = arrivals;
    j["schedulers"] = {{"cloudlet", sc.cloudletScheduler}, {"guest", sc.guestScheduler}};
    j["allocation_policy"] = sc.allocationPolicy;
    j["overhead_enabled"] = sc.overheadEnabled;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Building and running

/// Explicit guests and task mapping, with the deployment shorthand expanded.
struct ExpandedGuests {
    std::vector<GuestDef> guests;
    std::map<std::string, std::string> placement;
};

inline ExpandedGuests expandDeployment(const Scenario& sc)
{
    if (!sc.deployment) {
        return ExpandedGuests{sc.guests, sc.placement};
    }
    const auto& d = *sc.deployment;
    std::vector<int> hostsUsed;
    if (d.placement == "I") {
        hostsUsed = {0};
    } else if (d.placement == "II") {
        hostsUsed = {0, 1};
    } else {
        hostsUsed = {0, 2};
    }
    ExpandedGuests out;
    std::vector<std::string> taskGuests;
    for (std::size_t k = 0; k < hostsUsed.size(); ++k) {
        const std::string host = hostName(hostsUsed[k]);
        const std::string suffix = std::to_string(k);
        GuestDef base;
        base.pes = d.guestPes;
        base.ramMB = d.guestRamMB;
        base.bwBps = d.guestBwBps;
        if (d.virt == "V" || d.virt == "N") {
            GuestDef vm = base;
            vm.id = "vm" + suffix;
            vm.kind = "vm";
            vm.host = host;
            vm.overheadSeconds = d.vmOverheadSeconds;
            out.guests.push_back(vm);
        }
        if (d.virt == "C" || d.virt == "N") {
            GuestDef ct = base;
            ct.id = "ct" + suffix;
            ct.kind = "container";
            if (d.virt == "N") {
                ct.parent = "vm" + suffix;
            } else {
                ct.host = host;
            }
            ct.overheadSeconds = d.containerOverheadSeconds;
            out.guests.push_back(ct);
        }
        taskGuests.push_back(out.guests.back().id);
    }
    // The first task goes to the first guest, every other task to the last.
    for (std::size_t t = 0; t < sc.workflow.tasks.size(); ++t) {
        out.placement[sc.workflow.tasks[t].id] = t == 0 ? taskGuests.front() : taskGuests.back();
    }
    return out;
}

inline WorkflowDag buildWorkflow(const WorkflowDef& def)
{
    WorkflowDag dag;
    std::map<std::string, std::size_t> index;
    for (const auto& t : def.tasks) {
        index[t.id] = dag.tasks.size();
        dag.tasks.push_back(TaskTemplate{t.id, t.lengthMI, t.pes});
    }
    for (const auto& e : def.edges) {
        dag.edges.push_back(DataEdge{index.at(e.from), index.at(e.to), e.payloadBytes});
    }
    dag.deadlineSeconds = def.deadlineSeconds;
    return dag;
}

inline std::unique_ptr<CloudletScheduler> makeSchedulerByName(const std::string& name)
{
    if (name == "space_shared") {
        return makeScheduler(SchedulingPolicy::SpaceShared);
    }
    if (name == "space_shared_serial") {
        return makeScheduler(SchedulingPolicy::SpaceShared, true);
    }
    return makeScheduler(SchedulingPolicy::TimeShared);
}

inline ArrivalProcess arrivalProcessOf(const Scenario& sc, std::uint64_t seed)
{
    ArrivalProcess p;
    p.kind = sc.arrivals.kind == "exponential" ? ArrivalKind::Exponential : ArrivalKind::Fixed;
    p.scaleSeconds = sc.arrivals.scaleSeconds();
    p.seed = seed;
    p.count = sc.arrivals.count;
    return p;
}

/// Everything a finished run reports.
struct RunOutput {
    ResultSet results;
    std::vector<ActivationRecord> allRecords;
    std::vector<SimTime> releases;
    SimTime finalClock = 0.0;
    double energyJoules = 0.0;
    std::uint64_t dispatchedEvents = 0;
};

/// Builds the datacenter, network and broker for a validated scenario and
/// runs it to completion.
inline RunOutput runScenario(const Scenario& sc, std::uint64_t seed)
{
    if (auto errs = validateScenario(sc); !errs.empty()) {
        throw ScenarioError(std::move(errs));
    }
    Simulation sim;
    const auto dcTags = DatacenterTags::registerIn(sim.tags());
    const auto netTags = NetworkTags::registerIn(sim.tags());
    const auto brokerTags = BrokerTags::registerIn(sim.tags());

    auto& dc = sim.emplaceEntity<Datacenter>("datacenter", dcTags);
    const PowerModel power(sc.hosts.idleWatts, sc.hosts.maxWatts);
    for (int i = 0; i < sc.hosts.count; ++i) {
        dc.addHost(HostSpec::fromClock(i, sc.hosts.clkRateHz, sc.hosts.ipc, sc.hosts.pes, sc.hosts.ramMB,
                                       sc.hosts.bwBps),
                   power);
    }

    Topology topo;
    std::map<std::string, int> node;
    for (int i = 0; i < sc.hosts.count; ++i) {
        node[hostName(i)] = topo.addHost(i);
    }
    for (const auto& s : sc.switches) {
        node[s.id] = topo.addSwitch(
            Switch{s.id, s.level == "aggregate" ? SwitchLevel::Aggregate : SwitchLevel::Tor, s.forwardingDelaySeconds});
    }
    for (const auto& l : sc.links) {
        topo.addLink(node.at(l.a), node.at(l.b), l.bwBps);
    }
    // Rack of each host = its first neighbouring switch, for anti-affinity rules.
    std::vector<int> rack(static_cast<std::size_t>(sc.hosts.count), -1);
    for (const auto& l : topo.links()) {
        for (auto [end, other] : {std::pair{l.nodeA, l.nodeB}, std::pair{l.nodeB, l.nodeA}}) {
            if (!topo.isSwitch(end) && topo.isSwitch(other) && end < sc.hosts.count &&
                rack[static_cast<std::size_t>(end)] < 0) {
                rack[static_cast<std::size_t>(end)] = other;
            }
        }
    }
    auto& net = sim.emplaceEntity<Network>("network", std::move(topo), netTags, sc.overheadEnabled);
    dc.attachNetwork(net);

    const ExpandedGuests expanded = expandDeployment(sc);
    const double hostMips = mipsFromClock(sc.hosts.clkRateHz, sc.hosts.ipc);
    auto selection = makeSelectionPolicy(sc.allocationPolicy, seed);
    AllocationPolicy allocation(*selection, dc.hostEntities(), rack);
    std::map<std::string, int> guestId;
    std::vector<std::string> pending;
    for (const auto& g : expanded.guests) {
        pending.push_back(g.id);
    }
    // Parents are created before their children regardless of file order.
    while (!pending.empty()) {
        bool progressed = false;
        for (auto it = pending.begin(); it != pending.end();) {
            const GuestDef& g = *std::find_if(expanded.guests.begin(), expanded.guests.end(),
                                              [&](const auto& d) { return d.id == *it; });
            if (!g.parent.empty() && guestId.count(g.parent) == 0) {
                ++it;
                continue;
            }
            const int gid = static_cast<int>(guestId.size());
            GuestSpec spec;
            spec.id = gid;
            spec.kind = g.kind == "vm" ? GuestKind::Vm : GuestKind::Container;
            spec.core = CoreAttributes{g.pes, g.mips.value_or(hostMips), g.ramMB, g.bwBps};
            spec.virtOverheadSeconds = g.overheadSeconds;
            auto scheduler = makeSchedulerByName(g.cloudletScheduler.empty() ? sc.cloudletScheduler : g.cloudletScheduler);
            GuestEntity& guest = spec.kind == GuestKind::Vm
                                     ? static_cast<GuestEntity&>(dc.addVm(spec, std::move(scheduler)))
                                     : static_cast<GuestEntity&>(dc.addContainer(spec, std::move(scheduler)));
            PlacementResult placed;
            if (!g.parent.empty()) {
                placed = dc.guest(guestId.at(g.parent)).asHost()->place(guest);
            } else if (!g.host.empty()) {
                placed = dc.host(std::stoi(g.host.substr(4))).place(guest);
            } else {
                placed = allocation.allocateGuest(guest);
            }
            if (!placed) {
                throw ConfigurationError("cannot place guest '" + g.id + "': " + placed.message);
            }
            guestId[g.id] = gid;
            it = pending.erase(it);
            progressed = true;
        }
        if (!progressed) {
            throw ConfigurationError("guest parent chain cannot be resolved");
        }
    }

    WorkflowDag dag = buildWorkflow(sc.workflow);
    std::vector<int> taskGuest;
    for (const auto& t : sc.workflow.tasks) {
        taskGuest.push_back(guestId.at(expanded.placement.at(t.id)));
    }
    RunOutput out;
    out.releases = sampleArrivals(arrivalProcessOf(sc, seed));
    auto& broker = sim.emplaceEntity<Broker>("broker", brokerTags, dcTags, dc, std::move(dag), std::move(taskGuest),
                                             out.releases);
    out.finalClock = sim.run();
    out.allRecords = broker.records();
    out.results = collectResults(broker.records());
    out.energyJoules = dc.energyJoules(0.0, out.finalClock);
    out.dispatchedEvents = sim.dispatchedEvents();
    return out;
}

/// Four hosts in two racks under one aggregate switch, all links 1 Gb/s,
/// running the two-task chain T0 -> T1 of 10000 MI each.
inline Scenario caseStudyScenario(const std::string& virt = "V", const std::string& placement = "I",
                                  std::int64_t payloadBytes = 1000000000, int count = 1, bool overheadEnabled = true)
{
    Scenario sc;
    sc.name = "case-study";
    sc.switches = {{"tor0", "tor", 0.0}, {"tor1", "tor", 0.0}, {"agg", "aggregate", 0.0}};
    sc.links = {{"host0", "tor0", 1e9}, {"host1", "tor0", 1e9}, {"host2", "tor1", 1e9},
                {"host3", "tor1", 1e9}, {"tor0", "agg", 1e9},   {"tor1", "agg", 1e9}};
    DeploymentDef d;
    d.virt = virt;
    d.placement = placement;
    sc.deployment = d;
    sc.workflow.tasks = {{"T0", 10000.0, 1}, {"T1", 10000.0, 1}};
    sc.workflow.edges = {{"T0", "T1", payloadBytes}};
    sc.workflow.deadlineSeconds = 90.0;
    sc.arrivals.kind = "exponential";
    sc.arrivals.meanSeconds = 2.564;
    sc.arrivals.count = count;
    sc.overheadEnabled = overheadEnabled;
    return sc;
}

} // namespace dcsim
