#include "xmal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "xmal/error.hpp"

namespace xmal {

using nlohmann::json;

UncertaintyHistogram UncertaintyHistogram::of(std::span<const double> entropies, std::size_t num_classes) {
    UncertaintyHistogram h;
    const double width = std::log(static_cast<double>(num_classes)) / static_cast<double>(kBins);
    for (double e : entropies) {
        auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(e / width)));
        h.counts[std::min(bin, kBins - 1)] += 1;
    }
    return h;
}

std::size_t UncertaintyHistogram::total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

double UncertaintyHistogram::fraction_below(std::size_t bins) const {
    const auto t = total();
    if (t == 0) return 0.0;
    std::size_t below = 0;
    for (std::size_t b = 0; b < std::min(bins, counts.size()); ++b) below += counts[b];
    return static_cast<double>(below) / static_cast<double>(t);
}

std::optional<double> top_fraction_mean(std::span<const double> values, double fraction) {
    if (values.empty()) return std::nullopt;
    std::vector<double> v(values.begin(), values.end());
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, v.size());
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += v[i];
    return acc / static_cast<double>(k);
}

bool IterationMetrics::same_outcome(const IterationMetrics& o) const {
    return iteration == o.iteration && labeled == o.labeled && unlabeled == o.unlabeled &&
           labeled_fraction == o.labeled_fraction && test_accuracy == o.test_accuracy &&
           loss_similarity == o.loss_similarity && loss_reliability == o.loss_reliability &&
           loss_task == o.loss_task && loss_total == o.loss_total &&
           first_epoch_loss == o.first_epoch_loss && last_epoch_loss == o.last_epoch_loss &&
           histogram_pre == o.histogram_pre && histogram_post == o.histogram_post &&
           top5_mean_pre == o.top5_mean_pre && top5_mean_post == o.top5_mean_post &&
           acquired == o.acquired && warm_start == o.warm_start;
}

bool MetricsLog::same_outcome(const MetricsLog& o) const {
    if (method != o.method || seed != o.seed || num_classes != o.num_classes || universe != o.universe ||
        trainable != o.trainable || iterations.size() != o.iterations.size()) {
        return false;
    }
    for (std::size_t i = 0; i < iterations.size(); ++i)
        if (!iterations[i].same_outcome(o.iterations[i])) return false;
    return true;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

std::string MetricsLog::to_json() const {
    json j;
    j["format"] = "xmal-metrics";
    j["version"] = 1;
    j["method"] = method;
    j["seed"] = seed;
    j["num_classes"] = num_classes;
    j["universe"] = universe;
    j["trainable"] = trainable;
    j["iterations"] = json::array();
    for (const auto& it : iterations) {
        j["iterations"].push_back({
            {"iteration", it.iteration},
            {"labeled", it.labeled},
            {"unlabeled", it.unlabeled},
            {"labeled_fraction", it.labeled_fraction},
            {"test_accuracy", it.test_accuracy},
            {"loss_similarity", it.loss_similarity},
            {"loss_reliability", it.loss_reliability},
            {"loss_task", it.loss_task},
            {"loss_total", it.loss_total},
            {"first_epoch_loss", it.first_epoch_loss},
            {"last_epoch_loss", it.last_epoch_loss},
            {"histogram_pre", it.histogram_pre.counts},
            {"histogram_post", it.histogram_post.counts},
            {"top5_mean_pre", opt(it.top5_mean_pre)},
            {"top5_mean_post", opt(it.top5_mean_post)},
            {"acquired", it.acquired},
            {"warm_start", it.warm_start},
            {"wall_clock_seconds", it.wall_clock_seconds},
        });
    }
    return j.dump(1);
}

MetricsLog MetricsLog::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("format") != "xmal-metrics") throw DataError("not a metrics log");
        MetricsLog log;
        log.method = j.at("method").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.num_classes = j.at("num_classes").get<std::size_t>();
        log.universe = j.at("universe").get<std::size_t>();
        log.trainable = j.at("trainable").get<std::size_t>();
        for (const auto& e : j.at("iterations")) {
            IterationMetrics it;
            it.iteration = e.at("iteration").get<std::size_t>();
            it.labeled = e.at("labeled").get<std::size_t>();
            it.unlabeled = e.at("unlabeled").get<std::size_t>();
            it.labeled_fraction = e.at("labeled_fraction").get<double>();
            it.test_accuracy = e.at("test_accuracy").get<double>();
            it.loss_similarity = e.at("loss_similarity").get<double>();
            it.loss_reliability = e.at("loss_reliability").get<double>();
            it.loss_task = e.at("loss_task").get<double>();
            it.loss_total = e.at("loss_total").get<double>();
            it.first_epoch_loss = e.at("first_epoch_loss").get<double>();
            it.last_epoch_loss = e.at("last_epoch_loss").get<double>();
            it.histogram_pre.counts = e.at("histogram_pre").get<std::vector<std::size_t>>();
            it.histogram_post.counts = e.at("histogram_post").get<std::vector<std::size_t>>();
            it.top5_mean_pre = opt_from(e.at("top5_mean_pre"));
            it.top5_mean_post = opt_from(e.at("top5_mean_post"));
            it.acquired = e.at("acquired").get<std::size_t>();
            it.warm_start = e.at("warm_start").get<bool>();
            it.wall_clock_seconds = e.at("wall_clock_seconds").get<double>();
            log.iterations.push_back(std::move(it));
        }
        return log;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metrics log: ") + e.what());
    }
}

void MetricsLog::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics log " + path.string());
    out << to_json() << '\n';
}

MetricsLog MetricsLog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read metrics log " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace xmal
