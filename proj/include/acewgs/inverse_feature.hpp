#pragma once

#include "acewgs/error.hpp"
#include "acewgs/llm_gateway.hpp"
#include "acewgs/metadata_query.hpp"
#include "acewgs/pso_optimizer.hpp"
#include "acewgs/surrogate_model.hpp"

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace acewgs {

// ---------------------------------------------------------------------------
// Parameter settings

struct ParameterSettings {
    std::string base_metal;
    std::string support;
    std::optional<std::string> promoter;
    std::string prep_method;
    /// °C, inclusive.
    Bounds temperature_range;
    std::map<DesignDim, Bounds> overrides;
};

namespace settings_detail {

[[noreturn]] inline void invalid(const std::string& msg) {
    throw Error(Errc::InvalidSettings, msg);
}

inline Bounds bounds_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        invalid(what + " must be a [lo, hi] pair of numbers");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace settings_detail

inline ParameterSettings settings_from_json(const nlohmann::json& j) {
    using settings_detail::invalid;
    if (!j.is_object()) {
        invalid("settings must be a JSON object");
    }
    auto required = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
            invalid(std::string("missing or empty '") + key + "'");
        }
        return it->get<std::string>();
    };
    ParameterSettings s;
    s.base_metal = required("base_metal");
    s.support = required("support");
    s.prep_method = required("prep_method");
    if (auto it = j.find("promoter"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            invalid("'promoter' must be a string");
        }
        if (!it->get<std::string>().empty()) {
            s.promoter = it->get<std::string>();
        }
    }
    auto tr = j.find("temperature_range");
    if (tr == j.end()) {
        invalid("missing 'temperature_range'");
    }
    s.temperature_range = settings_detail::bounds_from_json(*tr, "temperature_range");
    if (auto it = j.find("bounds"); it != j.end()) {
        if (!it->is_object()) {
            invalid("'bounds' must be an object of [lo, hi] pairs");
        }
        for (const auto& [name, value] : it->items()) {
            auto dim = design_dim_from_name(name);
            if (!dim) {
                invalid("unknown bound '" + name + "'");
            }
            s.overrides[*dim] = settings_detail::bounds_from_json(value, "bounds." + name);
        }
    }
    return s;
}

inline nlohmann::json to_json(const ParameterSettings& s) {
    nlohmann::json j = {{"base_metal", s.base_metal},
                        {"support", s.support},
                        {"prep_method", s.prep_method},
                        {"temperature_range", {s.temperature_range.lo, s.temperature_range.hi}}};
    j["promoter"] = s.promoter ? nlohmann::json(*s.promoter) : nlohmann::json(nullptr);
    if (!s.overrides.empty()) {
        nlohmann::json b = nlohmann::json::object();
        for (const auto& [dim, bounds] : s.overrides) {
            b[std::string(kDesignDimNames[idx(dim)])] = {bounds.lo, bounds.hi};
        }
        j["bounds"] = b;
    }
    return j;
}

/// Same keys as the JSON form; `[bounds]` is a table of two-element arrays.
inline ParameterSettings settings_from_toml(std::string_view text) {
    toml::table doc;
    try {
        doc = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw Error(Errc::InvalidSettings, std::string("settings TOML: ") + std::string(e.description()));
    }
    nlohmann::json j = nlohmann::json::object();
    for (auto&& [key, node] : doc) {
        const std::string k(key.str());
        if (auto s = node.value<std::string>(); s && node.is_string()) {
            j[k] = *s;
        } else if (auto* arr = node.as_array()) {
            nlohmann::json a = nlohmann::json::array();
            for (auto& v : *arr) {
                a.push_back(v.value<double>().value_or(std::nan("")));
            }
            j[k] = a;
        } else if (auto* tbl = node.as_table()) {
            nlohmann::json t = nlohmann::json::object();
            for (auto&& [bk, bv] : *tbl) {
                nlohmann::json a = nlohmann::json::array();
                if (auto* barr = bv.as_array()) {
                    for (auto& v : *barr) {
                        a.push_back(v.value<double>().value_or(std::nan("")));
                    }
                }
                t[std::string(bk.str())] = a;
            }
            j[k] = t;
        }
    }
    return settings_from_json(j);
}

/// Checks ids against the catalog and assembles the search box.
inline DesignSpace make_design_space(const ParameterSettings& s, const Catalog& catalog) {
    using settings_detail::invalid;
    if (!catalog.contains(CatalogKind::BaseMetal, s.base_metal)) {
        invalid("unknown base metal '" + s.base_metal + "'");
    }
    if (!catalog.contains(CatalogKind::Support, s.support)) {
        invalid("unknown support '" + s.support + "'");
    }
    if (s.promoter && !catalog.contains(CatalogKind::Promoter, *s.promoter)) {
        invalid("unknown promoter '" + *s.promoter + "'");
    }
    if (!catalog.contains(CatalogKind::PrepMethod, s.prep_method)) {
        invalid("unknown preparation method '" + s.prep_method + "'");
    }
    const auto& t = s.temperature_range;
    if (!std::isfinite(t.lo) || !std::isfinite(t.hi)) {
        invalid("temperature_range must be finite");
    }
    if (t.lo > t.hi) {
        invalid("temperature_range lower bound exceeds upper bound");
    }
    DesignSpace space;
    space.base_metal = s.base_metal;
    space.promoter = s.promoter;
    space.support = s.support;
    space.prep_method = s.prep_method;
    space.bounds = DesignSpace::default_bounds(t, s.promoter.has_value());
    for (const auto& [dim, b] : s.overrides) {
        if (dim == DesignDim::TemperatureC) {
            invalid("set the temperature through temperature_range");
        }
        if (!(b.lo <= b.hi)) {
            invalid(std::string(kDesignDimNames[idx(dim)]) + " bound lower value exceeds upper value");
        }
        space[dim] = b;
    }
    try {
        space.validate();
    } catch (const Error& e) {
        invalid(e.message());
    }
    return space;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportComponent {
    std::string species;
    double wt_pct = 0.0;
};

struct ReportGas {
    std::string gas;
    double vol_pct = 0.0;
};

struct InverseReport {
    std::vector<ReportComponent> composition;
    double conversion = 0.0;
    double uncertainty = 0.0;
    double x_eq = 0.0;
    double temperature_c = 0.0;
    std::string prep_method;
    std::vector<ReportGas> feed;
    double time_on_stream_h = 0.0;
    double w_f_ratio = 0.0;
    /// Deterministic one-paragraph statement of the structured fields.
    std::string summary;
    std::string narrative;
    bool narrative_truncated = false;
    bool narrative_degraded = false;
    std::size_t iterations_used = 0;
    std::size_t evaluations = 0;
};

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::size_t kNarrativeWordLimit = 200;

inline double round2(double v) {
    double r = std::round(v * 100.0) / 100.0;
    return r == 0.0 ? 0.0 : r;
}

/// Two decimals with trailing zeros dropped: 5 -> "5", 0.10 -> "0.1".
inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    std::string s(buf);
    if (auto dot = s.find('.'); dot != std::string::npos) {
        while (s.back() == '0') {
            s.pop_back();
        }
        if (s.back() == '.') {
            s.pop_back();
        }
    }
    return s == "-0" ? "0" : s;
}

inline std::size_t count_words(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::size_t n = 0;
    for (std::string w; in >> w;) {
        ++n;
    }
    return n;
}

/// Keeps the text through the end of the `limit`-th word.
inline std::string truncate_words(std::string_view text, std::size_t limit) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i >= text.size()) {
            break;
        }
        if (words == limit) {
            break;
        }
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        ++words;
    }
    return trim(text.substr(0, i));
}

inline std::string report_summary(const InverseReport& r) {
    std::string out = "Found a catalytic solution of ";
    // Composition lists metals first and the support last.
    const std::size_t metals = r.composition.empty() ? 0 : r.composition.size() - 1;
    for (std::size_t i = 0; i < metals; ++i) {
        if (i) {
            out += ", ";
        }
        out += r.composition[i].species + " (" + format_number(r.composition[i].wt_pct) + "%)";
    }
    if (!r.composition.empty()) {
        const auto& support = r.composition.back();
        out += " with the support of " + support.species + " (" + format_number(support.wt_pct) + "%)";
    }
    out += " that can achieve maximum " + format_number(r.conversion) + "% (error ± " +
           format_number(r.uncertainty) + "%) CO conversion at " + format_number(r.temperature_c) + " °C. ";
    out += "The catalyst preparation method is " + r.prep_method + ". ";
    out += "The initial feed gases are ";
    for (std::size_t i = 0; i < r.feed.size(); ++i) {
        if (i) {
            out += i + 1 == r.feed.size() ? ", and " : ", ";
        }
        out += r.feed[i].gas + " (" + format_number(r.feed[i].vol_pct) + "%)";
    }
    out += ". The time on stream is " + format_number(r.time_on_stream_h) +
           (format_number(r.time_on_stream_h) == "1" ? " hour" : " hours") + ". ";
    out += "The ratio of catalyst weight to feed flow rate is " + format_number(r.w_f_ratio) + " mg min/ml.";
    return out;
}

/// Structured part of the report; numbers rounded to display precision.
inline InverseReport structured_report(const Solution& solution, const Catalog& catalog) {
    const auto& d = solution.design;
    InverseReport r;
    r.composition.push_back({catalog.display(CatalogKind::BaseMetal, d.base.id), round2(d.base.wt_pct)});
    if (d.promoter) {
        r.composition.push_back({catalog.display(CatalogKind::Promoter, d.promoter->id), round2(d.promoter->wt_pct)});
    }
    double metals_wt = 0.0;
    for (const auto& c : r.composition) {
        metals_wt += c.wt_pct;
    }
    double support_wt = round2(d.support_wt());
    if (std::abs(metals_wt + support_wt - 100.0) > 0.01 + 1e-9) {
        support_wt = round2(100.0 - metals_wt);
    }
    r.composition.push_back({catalog.display(CatalogKind::Support, d.support), support_wt});
    r.conversion = round2(solution.prediction.conversion);
    r.uncertainty = round2(solution.prediction.uncertainty);
    r.x_eq = round2(solution.prediction.x_eq);
    r.temperature_c = round2(d.temperature.value);
    r.prep_method = catalog.display(CatalogKind::PrepMethod, d.prep_method);
    r.feed = {{"CO", round2(100.0 * d.feed.y_co)},
              {"H2O", round2(100.0 * d.feed.y_h2o)},
              {"CO2", round2(100.0 * d.feed.y_co2)},
              {"H2", round2(100.0 * d.feed.y_h2)},
              {"N2", round2(100.0 * d.feed.y_n2)}};
    r.time_on_stream_h = round2(d.time_on_stream_h);
    r.w_f_ratio = round2(d.w_f_ratio);
    r.iterations_used = solution.iterations_used;
    r.evaluations = solution.evaluations;
    r.summary = report_summary(r);
    return r;
}

inline constexpr std::string_view kDefaultNarrativePrompt =
    R"(You explain the output of a catalyst inverse-design model to a researcher.
The model searched catalyst compositions and reaction conditions for the highest
predicted CO conversion in the water-gas shift reaction. Using only the result
below, explain it in plain language in no more than {max_words} words. Do not
change or invent any numbers.

Result:
{solution})";

inline std::string narrative_prompt(std::string_view tmpl, const InverseReport& r) {
    auto p = fill_placeholder(tmpl, "max_words", std::to_string(kNarrativeWordLimit));
    return fill_placeholder(p, "solution", r.summary);
}

/// Structured fields first, then the model's explanation. An over-long
/// explanation gets one stricter retry and is then cut at the word limit;
/// a failing model leaves the narrative empty and flags the report.
inline InverseReport render_report(const Solution& solution, const Catalog& catalog, const LlmClient* llm,
                                   std::string_view prompt_template = kDefaultNarrativePrompt) {
    InverseReport r = structured_report(solution, catalog);
    if (!llm) {
        r.narrative_degraded = true;
        return r;
    }
    try {
        const auto prompt = narrative_prompt(prompt_template, r);
        auto text = trim(llm->generate(prompt).text);
        if (count_words(text) > kNarrativeWordLimit) {
            const auto stricter = prompt + "\n\nYour previous explanation had " + std::to_string(count_words(text)) +
                                  " words. Rewrite it in at most " + std::to_string(kNarrativeWordLimit) +
                                  " words. This limit is strict.";
            text = trim(llm->generate(stricter).text);
            if (count_words(text) > kNarrativeWordLimit) {
                text = truncate_words(text, kNarrativeWordLimit);
                r.narrative_truncated = true;
            }
        }
        r.narrative = std::move(text);
    } catch (const Error&) {
        r.narrative.clear();
        r.narrative_degraded = true;
    }
    return r;
}

inline nlohmann::json to_json(const InverseReport& r) {
    nlohmann::json comp = nlohmann::json::array();
    for (const auto& c : r.composition) {
        comp.push_back({{"species", c.species}, {"wt_pct", c.wt_pct}});
    }
    nlohmann::json feed = nlohmann::json::array();
    for (const auto& g : r.feed) {
        feed.push_back({{"gas", g.gas}, {"vol_pct", g.vol_pct}});
    }
    return {{"schema_version", kReportSchemaVersion},
            {"composition", comp},
            {"conversion", r.conversion},
            {"uncertainty", r.uncertainty},
            {"x_eq", r.x_eq},
            {"temperature_c", r.temperature_c},
            {"prep_method", r.prep_method},
            {"feed", feed},
            {"time_on_stream_h", r.time_on_stream_h},
            {"w_f_ratio", r.w_f_ratio},
            {"summary", r.summary},
            {"narrative", r.narrative},
            {"narrative_truncated", r.narrative_truncated},
            {"narrative_degraded", r.narrative_degraded},
            {"iterations_used", r.iterations_used},
            {"evaluations", r.evaluations}};
}

inline InverseReport report_from_json(const nlohmann::json& j) {
    InverseReport r;
    try {
        for (const auto& c : j.at("composition")) {
            r.composition.push_back({c.at("species").get<std::string>(), c.at("wt_pct").get<double>()});
        }
        for (const auto& g : j.at("feed")) {
            r.feed.push_back({g.at("gas").get<std::string>(), g.at("vol_pct").get<double>()});
        }
        r.conversion = j.at("conversion").get<double>();
        r.uncertainty = j.at("uncertainty").get<double>();
        r.x_eq = j.at("x_eq").get<double>();
        r.temperature_c = j.at("temperature_c").get<double>();
        r.prep_method = j.at("prep_method").get<std::string>();
        r.time_on_stream_h = j.at("time_on_stream_h").get<double>();
        r.w_f_ratio = j.at("w_f_ratio").get<double>();
        r.summary = j.at("summary").get<std::string>();
        r.narrative = j.at("narrative").get<std::string>();
        r.narrative_truncated = j.at("narrative_truncated").get<bool>();
        r.narrative_degraded = j.at("narrative_degraded").get<bool>();
        r.iterations_used = j.value("iterations_used", std::size_t{0});
        r.evaluations = j.value("evaluations", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::FormatError, std::string("InverseReport JSON: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Background jobs

enum class JobStatus { Queued, Running, Finished, Failed };

constexpr std::string_view to_string(JobStatus s) noexcept {
    switch (s) {
    case JobStatus::Queued: return "Queued";
    case JobStatus::Running: return "Running";
    case JobStatus::Finished: return "Finished";
    case JobStatus::Failed: return "Failed";
    }
    return "Failed";
}

struct InverseJob {
    std::string job_id;
    JobStatus status = JobStatus::Queued;
    ParameterSettings settings;
    std::optional<InverseReport> result;
    std::size_t progress_done = 0;
    std::size_t progress_total = 0;
    std::string error;
};

inline nlohmann::json to_json(const InverseJob& job) {
    nlohmann::json j = {{"job_id", job.job_id},
                        {"status", to_string(job.status)},
                        {"settings", to_json(job.settings)},
                        {"progress", {{"done", job.progress_done}, {"total", job.progress_total}}}};
    j["result"] = job.result ? to_json(*job.result) : nlohmann::json(nullptr);
    if (!job.error.empty()) {
        j["error"] = job.error;
    }
    return j;
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;
using InverseRunner = std::function<InverseReport(const ParameterSettings&, const ProgressFn&)>;

/// Runs inverse jobs on a fixed worker pool. Terminal jobs are kept in LRU
/// order (poll counts as use) and evicted beyond `capacity`.
class InverseJobQueue {
public:
    InverseJobQueue(InverseRunner runner, std::size_t workers = 2, std::size_t capacity = 100)
        : runner_(std::move(runner)), capacity_(capacity) {
        std::random_device rd;
        id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
            workers_.emplace_back([this] { work(); });
        }
    }

    InverseJobQueue(const InverseJobQueue&) = delete;
    InverseJobQueue& operator=(const InverseJobQueue&) = delete;

    ~InverseJobQueue() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        cv_.notify_all();
        workers_.clear();
    }

    std::string submit(ParameterSettings settings) {
        std::lock_guard lock(mutex_);
        const std::uint64_t n = ++counter_;
        char buf[48];
        std::snprintf(buf, sizeof buf, "job-%06llu-%08llx", static_cast<unsigned long long>(n),
                      static_cast<unsigned long long>((id_salt_ ^ (n * 0x9E3779B97F4A7C15ULL)) & 0xFFFFFFFFULL));
        InverseJob job;
        job.job_id = buf;
        job.settings = std::move(settings);
        jobs_.emplace(job.job_id, job);
        pending_.push_back(job.job_id);
        cv_.notify_one();
        return job.job_id;
    }

    InverseJob poll(const std::string& job_id) {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) {
            throw Error(Errc::UnknownJob, "no job " + job_id);
        }
        touch_locked(job_id);
        return it->second;
    }

    /// Blocks until the job is terminal or the timeout passes.
    InverseJob wait(const std::string& job_id, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mutex_);
        auto terminal = [&] {
            auto it = jobs_.find(job_id);
            return it == jobs_.end() || it->second.status == JobStatus::Finished ||
                   it->second.status == JobStatus::Failed;
        };
        done_cv_.wait_for(lock, timeout, terminal);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) {
            throw Error(Errc::UnknownJob, "no job " + job_id);
        }
        touch_locked(job_id);
        return it->second;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return jobs_.size();
    }

private:
    void touch_locked(const std::string& job_id) {
        auto pos = lru_pos_.find(job_id);
        if (pos != lru_pos_.end()) {
            lru_.splice(lru_.end(), lru_, pos->second);
        }
    }

    void finish_locked(const std::string& job_id) {
        lru_.push_back(job_id);
        lru_pos_[job_id] = std::prev(lru_.end());
        while (lru_.size() > capacity_) {
            const auto victim = lru_.front();
            lru_.pop_front();
            lru_pos_.erase(victim);
            jobs_.erase(victim);
        }
    }

    void work() {
        while (true) {
            std::string id;
            ParameterSettings settings;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
                if (stopping_) {
                    return;
                }
                id = pending_.front();
                pending_.pop_front();
                auto& job = jobs_.at(id);
                job.status = JobStatus::Running;
                settings = job.settings;
            }
            auto progress = [&](std::size_t done, std::size_t total) {
                std::lock_guard lock(mutex_);
                if (auto it = jobs_.find(id); it != jobs_.end()) {
                    it->second.progress_done = done;
                    it->second.progress_total = total;
                }
            };
            std::optional<InverseReport> report;
            std::string error;
            try {
                report = runner_(settings, progress);
            } catch (const std::exception& e) {
                error = e.what();
            }
            {
                std::lock_guard lock(mutex_);
                auto& job = jobs_.at(id);
                if (report) {
                    job.result = std::move(report);
                    job.status = JobStatus::Finished;
                } else {
                    job.error = error.empty() ? "inverse run failed" : error;
                    job.status = JobStatus::Failed;
                }
                finish_locked(id);
            }
            done_cv_.notify_all();
        }
    }

    InverseRunner runner_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::map<std::string, InverseJob> jobs_;
    std::deque<std::string> pending_;
    std::list<std::string> lru_;
    std::map<std::string, std::list<std::string>::iterator> lru_pos_;
    std::uint64_t counter_ = 0;
    std::uint64_t id_salt_ = 0;
    bool stopping_ = false;
    std::vector<std::jthread> workers_;
};

/// Runner wiring settings -> design space -> PSO -> report.
inline InverseRunner make_inverse_runner(const Catalog& catalog, const ModelBundle& bundle, PsoConfig pso,
                                         double risk_lambda, const LlmClient* llm,
                                         std::string narrative_template = std::string(kDefaultNarrativePrompt)) {
    return [&catalog, &bundle, pso, risk_lambda, llm,
            tmpl = std::move(narrative_template)](const ParameterSettings& s, const ProgressFn& progress) {
        const auto space = make_design_space(s, catalog);
        auto solution = optimize_design(space, bundle, pso, risk_lambda, [&](const PsoProgress& p) {
            if (progress) {
                progress(p.iteration, p.max_iters);
            }
        });
        return render_report(solution, catalog, llm, tmpl);
    };
}

} // namespace acewgs
