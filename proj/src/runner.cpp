#include "xmal/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "xmal/annotation_hub.hpp"
#include "xmal/checkpoint.hpp"
#include "xmal/error.hpp"

namespace xmal {

using nlohmann::json;

LossSummary train_iteration(ModelParams& params, AdamState& adam, const Dataset& data,
                            const LabelMap& labeled, const TrainSettings& settings, std::mt19937_64& rng) {
    if (settings.batch_size < 2) throw ConfigError("batch size must be >= 2");
    LossSummary summary;
    if (settings.epochs == 0) return summary;
    if (labeled.size() < settings.batch_size) {
        throw ConfigError("labeled pool has " + std::to_string(labeled.size()) +
                          " samples, fewer than the batch size " + std::to_string(settings.batch_size) +
                          "; lower train.batch_size");
    }
    std::vector<SampleId> ids;
    ids.reserve(labeled.size());
    for (const auto& [id, label] : labeled) ids.push_back(id);

    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        std::shuffle(ids.begin(), ids.end(), rng);
        double epoch_total = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < ids.size(); start += settings.batch_size) {
            const std::size_t end = std::min(ids.size(), start + settings.batch_size);
            if (end - start < 2) break;
            const std::span<const SampleId> batch(ids.data() + start, end - start);
            std::vector<int> labels;
            labels.reserve(batch.size());
            for (auto id : batch) labels.push_back(labeled.at(id));

            ad::Tape tape;
            BoundModel model(tape, params);
            const auto obj = batch_objective(model, data.eeg_matrix(batch), data.face_matrix(batch), labels,
                                             settings.objective);
            tape.backward(obj.loss_total);
            const auto grads = model.gradients();
            adam_step(params.tensors(), grads, adam);

            summary.mean_similarity += obj.loss_similarity.value().item();
            summary.mean_reliability += obj.loss_reliability.value().item();
            summary.mean_task += obj.loss_task.value().item();
            summary.mean_total += obj.loss_total.value().item();
            epoch_total += obj.loss_total.value().item();
            ++epoch_steps;
            ++summary.steps;
        }
        summary.epoch_total.push_back(epoch_steps ? epoch_total / static_cast<double>(epoch_steps) : 0.0);
    }
    if (summary.steps > 0) {
        const double n = static_cast<double>(summary.steps);
        summary.mean_similarity /= n;
        summary.mean_reliability /= n;
        summary.mean_task /= n;
        summary.mean_total /= n;
    }
    return summary;
}

std::vector<int> predict_classes(const ModelParams& params, const Tensor& x_eeg) {
    const Tensor probs = predict_from_eeg(params, x_eeg);
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        auto row = probs.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double evaluate_accuracy(const ModelParams& params, const Dataset& data, const std::set<SampleId>& ids) {
    if (ids.empty()) return 0.0;
    const std::vector<SampleId> v(ids.begin(), ids.end());
    const auto predicted = predict_classes(params, data.eeg_matrix(v));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& label = data.at(v[i]).label;
        if (!label) throw DataError("evaluation sample " + std::to_string(v[i]) + " has no label");
        if (predicted[i] == *label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(v.size());
}

std::map<SampleId, double> entropy_scores(const ModelParams& params, const Dataset& data,
                                          const std::set<SampleId>& ids) {
    std::map<SampleId, double> out;
    if (ids.empty()) return out;
    const std::vector<SampleId> v(ids.begin(), ids.end());
    const Tensor probs = predict_from_eeg(params, data.eeg_matrix(v));
    for (std::size_t i = 0; i < v.size(); ++i) out[v[i]] = entropy(probs.row(i));
    return out;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.source == DataSource::Synthetic) return generate(cfg.synth);
    return ingest(cfg.data_path, cfg.schema);
}

std::string dataset_hash(const Dataset& data) {
    std::ostringstream out;
    write_features(out, data);
    return hex64(fnv1a(out.str()));
}

namespace {

std::vector<double> values_of(const std::map<SampleId, double>& scores) {
    std::vector<double> v;
    v.reserve(scores.size());
    for (const auto& [id, s] : scores) v.push_back(s);
    return v;
}

ModelConfig model_config(const ExperimentConfig& cfg, const Dataset& data) {
    ModelConfig mc;
    mc.eeg_dim = data.eeg_dim;
    mc.face_dim = data.face_dim;
    mc.hidden = cfg.hidden;
    mc.embedding_dim = cfg.embedding_dim;
    mc.num_classes = data.num_classes;
    return mc;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg, Dataset data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    data_.validate();
    if (data_.num_classes != cfg_.num_classes()) {
        throw ConfigError("dataset has " + std::to_string(data_.num_classes) + " classes, config expects " +
                          std::to_string(cfg_.num_classes()));
    }
    data_hash_ = dataset_hash(data_);
    pool_ = (cfg_.use_file_split && cfg_.source == DataSource::File) ? pool_from_tags(data_)
                                                                      : split(data_, cfg_.fractions, cfg_.split_seed);
    rng_.seed(cfg_.train_seed);
    init_model();
    simulated_ = std::make_unique<SimulatedOracle>(data_.labels(), data_.num_classes, cfg_.oracle.noise_rate,
                                                   cfg_.oracle.seed);
    log_.method = cfg_.method_label();
    log_.seed = cfg_.train_seed;
    log_.num_classes = data_.num_classes;
    log_.universe = pool_.universe();
    log_.trainable = pool_.labeled().size() + pool_.unlabeled().size();
}

void Experiment::init_model() {
    const std::uint64_t seed = iteration_ == 0 ? cfg_.model_seed : cfg_.model_seed ^ mix64(iteration_);
    params_ = ModelParams::initialize(model_config(cfg_, data_), seed);
    adam_ = AdamState::for_params(params_.tensors(), cfg_.optimizer);
}

std::chrono::milliseconds Experiment::remote_timeout() const {
    return std::chrono::milliseconds(static_cast<long long>(cfg_.oracle.timeout_seconds * 1000.0));
}

void Experiment::attach_hub(AnnotationHub* hub) {
    hub_ = hub;
    publish();
}

std::size_t Experiment::target_labeled() const {
    const auto trainable = pool_.labeled().size() + pool_.unlabeled().size();
    const auto want = static_cast<std::size_t>(
        std::llround(cfg_.budget_percent / 100.0 * static_cast<double>(pool_.universe())));
    return std::min(want, trainable);
}

std::size_t Experiment::acquisition_size() const {
    const double ratio = cfg_.ratio_percent / 100.0;
    if (cfg_.count_mode == CountMode::Fixed) return acquisition_count(pool_.universe(), ratio);
    return acquisition_count(pool_.unlabeled().size(), ratio);
}

std::vector<SampleId> Experiment::choose(const std::map<SampleId, double>& scores, std::size_t k) {
    if (cfg_.mode == AcquisitionMode::Entropy) return select_top(scores, k).ids();
    std::vector<SampleId> candidates(pool_.unlabeled().begin(), pool_.unlabeled().end());
    std::vector<SampleId> picked;
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked), k, rng_);
    return picked;
}

Annotation Experiment::ask_oracle(const std::vector<SampleId>& ids, const std::map<SampleId, double>& scores) {
    if (cfg_.oracle.kind == OracleKind::Simulated) return simulated_->annotate(ids);
    if (hub_ == nullptr) throw ConfigError("oracle.kind = remote requires the annotation service (use `serve`)");

    const Tensor probs = predict_from_eeg(params_, data_.eeg_matrix(ids));
    std::vector<PendingQuery> queries;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        PendingQuery q;
        q.sample_id = ids[i];
        q.probabilities.assign(probs.row(i).begin(), probs.row(i).end());
        auto it = scores.find(ids[i]);
        q.uncertainty = it != scores.end() ? it->second : entropy(probs.row(i));
        q.eeg = FeatureSummary::of(data_.at(ids[i]).eeg);
        q.face = FeatureSummary::of(data_.at(ids[i]).face);
        queries.push_back(std::move(q));
    }
    hub_->post_queries(std::move(queries));
    publish();
    return RemoteOracle(*hub_, remote_timeout()).annotate(ids);
}

RunStatus Experiment::step() {
    if (finished_) return RunStatus::Finished;
    const auto t0 = std::chrono::steady_clock::now();
    paused_ = false;
    try {
        if (hub_ != nullptr && cfg_.oracle.kind == OracleKind::Remote) {
            // Collect the batch left open by an earlier timeout before moving on.
            std::vector<SampleId> open;
            for (auto id : hub_->active_samples())
                if (pool_.unlabeled().contains(id)) open.push_back(id);
            if (!open.empty()) {
                const auto answer = RemoteOracle(*hub_, remote_timeout()).annotate(open);
                std::vector<SampleId> answered;
                for (auto id : open)
                    if (answer.labels.contains(id)) answered.push_back(id);
                pool_.transfer(answered, answer.labels);
                if (!answer.unanswered.empty()) {
                    paused_ = true;
                    publish();
                    return RunStatus::Paused;
                }
            }
        }
        if (cfg_.mode == AcquisitionMode::None && !topped_up_) {
            // Fill D_L up to the budget at random, then train once.
            const std::size_t need = target_labeled() - std::min(target_labeled(), pool_.labeled().size());
            const auto ids = [&] {
                std::vector<SampleId> candidates(pool_.unlabeled().begin(), pool_.unlabeled().end());
                std::vector<SampleId> picked;
                std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked), need, rng_);
                return picked;
            }();
            const auto answer = ask_oracle(ids, {});
            std::vector<SampleId> answered;
            for (auto id : ids)
                if (answer.labels.contains(id)) answered.push_back(id);
            pool_.transfer(answered, answer.labels);
            topped_up_ = true;
        }
        if (iteration_ > 0 && !cfg_.warm_start) init_model();

        IterationMetrics m;
        m.iteration = iteration_;
        m.warm_start = cfg_.warm_start;

        const auto pre = values_of(entropy_scores(params_, data_, pool_.unlabeled()));
        m.histogram_pre = UncertaintyHistogram::of(pre, data_.num_classes);
        m.top5_mean_pre = top_fraction_mean(pre, 0.05);

        TrainSettings ts{cfg_.objective, cfg_.batch_size, cfg_.epochs};
        const LossSummary loss = train_iteration(params_, adam_, data_, pool_.labeled(), ts, rng_);
        if (!params_.all_finite()) throw InvariantError("non-finite parameters after training");

        m.test_accuracy = evaluate_accuracy(params_, data_, pool_.test());
        const auto post_scores = entropy_scores(params_, data_, pool_.unlabeled());
        const auto post = values_of(post_scores);
        m.histogram_post = UncertaintyHistogram::of(post, data_.num_classes);
        m.top5_mean_post = top_fraction_mean(post, 0.05);
        if (m.histogram_post.total() != pool_.unlabeled().size()) {
            throw InvariantError("uncertainty histogram does not cover the unlabeled pool");
        }

        m.labeled = pool_.labeled().size();
        m.unlabeled = pool_.unlabeled().size();
        m.labeled_fraction = static_cast<double>(m.labeled) / static_cast<double>(pool_.universe());
        m.loss_similarity = loss.mean_similarity;
        m.loss_reliability = loss.mean_reliability;
        m.loss_task = loss.mean_task;
        m.loss_total = loss.mean_total;
        m.first_epoch_loss = loss.epoch_total.empty() ? 0.0 : loss.epoch_total.front();
        m.last_epoch_loss = loss.epoch_total.empty() ? 0.0 : loss.epoch_total.back();

        const bool done = cfg_.mode == AcquisitionMode::None || pool_.labeled().size() >= target_labeled() ||
                          pool_.unlabeled().empty();
        if (!done) {
            const std::size_t k = std::min({acquisition_size(), target_labeled() - pool_.labeled().size(),
                                            pool_.unlabeled().size()});
            std::map<SampleId, double> ranking = post_scores;
            if (cfg_.reliability_weighted) {
                const std::vector<SampleId> ids(pool_.unlabeled().begin(), pool_.unlabeled().end());
                const Tensor r = estimate_reliability(
                    params_, Modality::Eeg, encode(params_, Modality::Eeg, data_.eeg_matrix(ids)));
                for (std::size_t i = 0; i < ids.size(); ++i) ranking[ids[i]] *= 1.0 - r(i, 0);
            }
            const auto chosen = choose(ranking, k);
            const auto answer = ask_oracle(chosen, post_scores);
            std::vector<SampleId> answered;
            for (auto id : chosen)
                if (answer.labels.contains(id)) answered.push_back(id);
            const std::size_t before = pool_.labeled().size() + pool_.unlabeled().size();
            pool_.transfer(answered, answer.labels);
            if (pool_.labeled().size() + pool_.unlabeled().size() != before) {
                throw InvariantError("transfer changed |D_L| + |D_U|");
            }
            m.acquired = answered.size();
            paused_ = !answer.unanswered.empty();
        }
        pool_.check_invariants();
        m.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_.iterations.push_back(std::move(m));
        ++iteration_;
        finished_ = done;
    } catch (const InvariantError&) {
        dump_crash_state();
        throw;
    }
    publish();
    if (finished_) return RunStatus::Finished;
    return paused_ ? RunStatus::Paused : RunStatus::Running;
}

RunStatus Experiment::run(std::optional<std::size_t> max_iterations) {
    std::size_t done = 0;
    RunStatus status = finished_ ? RunStatus::Finished : RunStatus::Running;
    while (status == RunStatus::Running && (!max_iterations || done < *max_iterations)) {
        status = step();
        ++done;
    }
    return status;
}

void Experiment::publish() const {
    if (hub_ == nullptr) return;
    json status;
    status["iteration"] = iteration_;
    status["labeled"] = pool_.labeled().size();
    status["unlabeled"] = pool_.unlabeled().size();
    status["test"] = pool_.test().size();
    status["num_classes"] = data_.num_classes;
    status["finished"] = finished_;
    status["paused"] = paused_;
    status["method"] = cfg_.method_label();
    status["target_labeled"] = target_labeled();
    status["accuracy_history"] = json::array();
    status["labeled_fraction_history"] = json::array();
    for (const auto& it : log_.iterations) {
        status["accuracy_history"].push_back(it.test_accuracy);
        status["labeled_fraction_history"].push_back(it.labeled_fraction);
    }
    hub_->publish_status(status.dump());
    hub_->publish_metrics(log_.to_json());
}

namespace {

json tensors_json(const std::vector<Tensor>& ts) {
    json arr = json::array();
    for (const auto& t : ts) arr.push_back({{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.data()}});
    return arr;
}

std::vector<Tensor> tensors_from(const json& arr) {
    std::vector<Tensor> out;
    for (const auto& e : arr)
        out.emplace_back(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>(),
                         e.at("data").get<std::vector<double>>());
    return out;
}

}  // namespace

std::string Experiment::state_json() const {
    json j;
    j["format"] = "xmal-run-state";
    j["version"] = 1;
    j["config"] = cfg_.to_text();
    j["config_hash"] = cfg_.hash();
    j["dataset_hash"] = data_hash_;
    j["iteration"] = iteration_;
    j["finished"] = finished_;
    j["paused"] = paused_;
    j["topped_up"] = topped_up_;

    json pool;
    pool["universe"] = pool_.universe();
    pool["labeled"] = json::array();
    for (const auto& [id, label] : pool_.labeled()) pool["labeled"].push_back({id, label});
    pool["unlabeled"] = pool_.unlabeled();
    pool["test"] = pool_.test();
    pool["history"] = pool_.history();
    j["pool"] = pool;

    std::ostringstream ckpt;
    write_checkpoint(ckpt, params_);
    j["params"] = ckpt.str();
    j["adam"] = {{"step", adam_.step},
                 {"lr", adam_.hyper.lr},
                 {"beta1", adam_.hyper.beta1},
                 {"beta2", adam_.hyper.beta2},
                 {"epsilon", adam_.hyper.epsilon},
                 {"first_moment", tensors_json(adam_.first_moment)},
                 {"second_moment", tensors_json(adam_.second_moment)}};
    std::ostringstream rng;
    rng << rng_;
    j["rng"] = rng.str();
    j["metrics"] = json::parse(log_.to_json());
    return j.dump();
}

Experiment Experiment::resume(const std::string& state_json, Dataset data, const ExperimentConfig* expected) {
    json j;
    try {
        j = json::parse(state_json);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run-state: ") + e.what());
    }
    if (j.value("format", "") != "xmal-run-state" || j.value("version", 0) != 1) {
        throw DataError("not a version-1 run-state document");
    }
    try {
        Experiment ex;
        std::istringstream cfg_text(j.at("config").get<std::string>());
        ex.cfg_ = parse_config(cfg_text);
        if (ex.cfg_.hash() != j.at("config_hash").get<std::string>()) {
            throw ConfigError("run-state config does not match its recorded hash");
        }
        if (expected != nullptr && expected->hash() != ex.cfg_.hash()) {
            throw ConfigError("config hash mismatch: run-state " + ex.cfg_.hash() + " vs supplied " +
                              expected->hash() + "; refusing to resume");
        }
        if (expected != nullptr) {
            ex.cfg_.output_dir = expected->output_dir;
            ex.cfg_.service = expected->service;
        }
        ex.data_ = std::move(data);
        ex.data_.validate();
        ex.data_hash_ = dataset_hash(ex.data_);
        if (ex.data_hash_ != j.at("dataset_hash").get<std::string>()) {
            throw DataError("dataset differs from the one the run started with");
        }
        ex.iteration_ = j.at("iteration").get<std::size_t>();
        ex.finished_ = j.at("finished").get<bool>();
        ex.topped_up_ = j.at("topped_up").get<bool>();

        const auto& p = j.at("pool");
        LabelMap labeled;
        for (const auto& e : p.at("labeled")) labeled[e.at(0).get<SampleId>()] = e.at(1).get<int>();
        ex.pool_ = SamplePool::restore(p.at("universe").get<std::size_t>(), std::move(labeled),
                                       p.at("unlabeled").get<std::set<SampleId>>(),
                                       p.at("test").get<std::set<SampleId>>(),
                                       p.at("history").get<std::vector<std::vector<SampleId>>>());

        std::istringstream ckpt(j.at("params").get<std::string>());
        ex.params_ = read_checkpoint(ckpt);
        const auto& a = j.at("adam");
        ex.adam_.step = a.at("step").get<std::uint64_t>();
        ex.adam_.hyper = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                          a.at("epsilon").get<double>()};
        ex.adam_.first_moment = tensors_from(a.at("first_moment"));
        ex.adam_.second_moment = tensors_from(a.at("second_moment"));
        std::istringstream rng(j.at("rng").get<std::string>());
        rng >> ex.rng_;
        if (!rng) throw DataError("run-state: corrupt RNG state");
        ex.log_ = MetricsLog::from_json(j.at("metrics").dump());
        ex.simulated_ = std::make_unique<SimulatedOracle>(ex.data_.labels(), ex.data_.num_classes,
                                                          ex.cfg_.oracle.noise_rate, ex.cfg_.oracle.seed);
        return ex;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run-state: ") + e.what());
    }
}

Experiment Experiment::resume_file(const std::filesystem::path& state, const ExperimentConfig* expected) {
    std::ifstream in(state);
    if (!in) throw DataError("cannot read run-state " + state.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run-state: ") + e.what());
    }
    std::istringstream cfg_text(j.value("config", ""));
    const ExperimentConfig stored = parse_config(cfg_text);
    return resume(text, load_dataset(stored), expected);
}

void Experiment::write_outputs() const {
    if (cfg_.output_dir.empty()) return;
    const std::filesystem::path dir(cfg_.output_dir);
    std::filesystem::create_directories(dir);
    log_.save(dir / "metrics.json");
    save_checkpoint(dir / "model.ckpt", params_);
    {
        std::ofstream out(dir / "state.json");
        if (!out) throw DataError("cannot write " + (dir / "state.json").string());
        out << state_json() << '\n';
    }
    if (hub_ != nullptr) {
        std::ofstream out(dir / "audit.csv");
        out << "query_id,sample_id,label,timestamp_ms\n";
        for (const auto& row : hub_->audit_log())
            out << row.query_id << ',' << row.sample_id << ',' << row.label << ',' << row.timestamp_ms << '\n';
    }
}

void Experiment::dump_crash_state() const {
    if (cfg_.output_dir.empty()) return;
    try {
        std::filesystem::create_directories(cfg_.output_dir);
        std::ofstream out(std::filesystem::path(cfg_.output_dir) / "state.crash.json");
        out << state_json() << '\n';
    } catch (...) {
        std::cerr << "failed to write crash state\n";
    }
}

MetricsLog run_experiment(const ExperimentConfig& cfg) {
    Experiment ex(cfg, load_dataset(cfg));
    ex.run();
    return ex.log();
}

}  // namespace xmal
