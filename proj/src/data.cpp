#include "xmal/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "xmal/error.hpp"
#include "xmal/numfmt.hpp"

namespace xmal {

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Labeled: return "labeled";
        case Split::Unlabeled: return "unlabeled";
        case Split::Test: return "test";
    }
    return "unlabeled";
}

Split parse_split(std::string_view text) {
    if (text == "labeled") return Split::Labeled;
    if (text == "unlabeled" || text.empty()) return Split::Unlabeled;
    if (text == "test") return Split::Test;
    throw DataError("unknown split tag '" + std::string(text) + "'");
}

void Dataset::validate() const {
    if (num_classes < 2) throw DataError("dataset needs at least two classes");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.id != static_cast<SampleId>(i)) {
            throw DataError("sample ids must be dense and ordered; found id " + std::to_string(r.id) +
                            " at position " + std::to_string(i));
        }
        if (r.eeg.size() != eeg_dim || r.face.size() != face_dim) {
            throw DataError("sample " + std::to_string(r.id) + " has feature widths " +
                            std::to_string(r.eeg.size()) + "/" + std::to_string(r.face.size()) +
                            ", expected " + std::to_string(eeg_dim) + "/" + std::to_string(face_dim));
        }
        if (r.label && (*r.label < 0 || static_cast<std::size_t>(*r.label) >= num_classes)) {
            throw DataError("sample " + std::to_string(r.id) + " has label " + std::to_string(*r.label) +
                            " outside [0, " + std::to_string(num_classes) + ")");
        }
        if (r.split == Split::Test && !r.label) {
            throw DataError("test sample " + std::to_string(r.id) + " has no ground-truth label");
        }
    }
}

Tensor Dataset::eeg_matrix(std::span<const SampleId> ids) const {
    Tensor out(ids.size(), eeg_dim);
    for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(at(ids[r]).eeg.begin(), eeg_dim, out.row(r).begin());
    return out;
}

Tensor Dataset::face_matrix(std::span<const SampleId> ids) const {
    Tensor out(ids.size(), face_dim);
    for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(at(ids[r]).face.begin(), face_dim, out.row(r).begin());
    return out;
}

LabelMap Dataset::labels() const {
    LabelMap out;
    for (const auto& r : records)
        if (r.label) out[r.id] = *r.label;
    return out;
}

void SynthConfig::validate() const {
    if (n_samples == 0) throw ConfigError("synth: n_samples must be >= 1");
    if (eeg_dim == 0 || face_dim == 0) throw ConfigError("synth: feature widths must be >= 1");
    if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
    if (!(inconsistency_rate >= 0.0 && inconsistency_rate < 1.0 + 1e-12)) {
        throw ConfigError("synth: inconsistency_rate must lie in [0, 1]");
    }
    if (!(label_noise >= 0.0 && label_noise < 1.0)) throw ConfigError("synth: label_noise must lie in [0, 1)");
    if (!(eeg_noise >= 0.0) || !(face_noise >= 0.0)) throw ConfigError("synth: noise levels must be >= 0");
    if (!(margin >= 0.0)) throw ConfigError("synth: margin must be >= 0");
}

namespace {

/// `count` orthonormal vectors in R^dim scaled to pairwise distance `margin`.
std::vector<std::vector<double>> prototypes(std::size_t count, std::size_t dim, double margin,
                                            std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (auto& x : v) x = gauss(rng);
        for (const auto& b : basis) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += v[k] * b[k];
            for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * b[k];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    const double s = margin / std::sqrt(2.0);
    for (auto& b : basis)
        for (auto& x : b) x *= s;
    return basis;
}

Tensor random_map(std::size_t out_dim, std::size_t in_dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(out_dim)));
    Tensor a(out_dim, in_dim);
    for (auto& x : a.data()) x = gauss(rng);
    return a;
}

std::vector<double> apply(const Tensor& a, const std::vector<double>& v) {
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) out[i] += a(i, k) * v[k];
    return out;
}

int other_class(int c, std::size_t num_classes, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(1, num_classes - 1);
    return static_cast<int>((static_cast<std::size_t>(c) + pick(rng)) % num_classes);
}

}  // namespace

Dataset generate(const SynthConfig& cfg, SynthTrace* trace) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::size_t latent = std::max<std::size_t>(cfg.num_classes, 8);
    const auto eeg_protos = prototypes(cfg.num_classes, latent, cfg.margin, rng);
    const auto face_protos = prototypes(cfg.num_classes, latent, cfg.margin, rng);
    const Tensor a_eeg = random_map(cfg.eeg_dim, latent, rng);
    const Tensor a_face = random_map(cfg.face_dim, latent, rng);

    std::vector<std::vector<double>> eeg_centers, face_centers;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        eeg_centers.push_back(apply(a_eeg, eeg_protos[c]));
        face_centers.push_back(apply(a_face, face_protos[c]));
    }

    std::uniform_int_distribution<std::size_t> class_dist(0, cfg.num_classes - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.eeg_dim = cfg.eeg_dim;
    ds.face_dim = cfg.face_dim;
    ds.num_classes = cfg.num_classes;
    ds.records.reserve(cfg.n_samples);
    if (trace) {
        trace->latent_class.clear();
        trace->face_class.clear();
    }
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        const int u = static_cast<int>(class_dist(rng));
        FeatureRecord rec;
        rec.id = static_cast<SampleId>(i);
        rec.eeg = eeg_centers[static_cast<std::size_t>(u)];
        for (auto& x : rec.eeg) x += cfg.eeg_noise * gauss(rng);

        int face_u = u;
        if (unit(rng) < cfg.inconsistency_rate) face_u = other_class(u, cfg.num_classes, rng);
        rec.face = face_centers[static_cast<std::size_t>(face_u)];
        for (auto& x : rec.face) x += cfg.face_noise * gauss(rng);

        int stored = u;
        if (unit(rng) < cfg.label_noise) stored = other_class(u, cfg.num_classes, rng);
        rec.label = stored;
        ds.records.push_back(std::move(rec));
        if (trace) {
            trace->latent_class.push_back(u);
            trace->face_class.push_back(face_u);
        }
    }
    return ds;
}

SamplePool split(const Dataset& dataset, const SplitFractions& f, std::uint64_t seed) {
    if (!(f.labeled >= 0.0 && f.unlabeled >= 0.0 && f.test >= 0.0) ||
        std::abs(f.labeled + f.unlabeled + f.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be non-negative and sum to 1");
    }
    const std::size_t n = dataset.size();
    const auto n_labeled = static_cast<std::size_t>(std::llround(f.labeled * static_cast<double>(n)));
    const auto n_unlabeled = static_cast<std::size_t>(std::llround(f.unlabeled * static_cast<double>(n)));
    if (n_labeled == 0 || n_unlabeled == 0 || n_labeled + n_unlabeled >= n) {
        throw ConfigError("split of " + std::to_string(n) + " samples by (" + format_double(f.labeled) +
                          ", " + format_double(f.unlabeled) + ", " + format_double(f.test) +
                          ") leaves a part empty");
    }
    std::vector<SampleId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<SampleId>(i);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    LabelMap labeled;
    std::set<SampleId> unlabeled, test;
    for (std::size_t i = 0; i < n; ++i) {
        const SampleId id = order[i];
        if (i < n_labeled) {
            const auto& label = dataset.at(id).label;
            if (!label) throw DataError("initial labeled sample " + std::to_string(id) + " has no label");
            labeled[id] = *label;
        } else if (i < n_labeled + n_unlabeled) {
            unlabeled.insert(id);
        } else {
            if (!dataset.at(id).label) throw DataError("test sample " + std::to_string(id) + " has no label");
            test.insert(id);
        }
    }
    return SamplePool(n, std::move(labeled), std::move(unlabeled), std::move(test));
}

SamplePool pool_from_tags(const Dataset& dataset) {
    LabelMap labeled;
    std::set<SampleId> unlabeled, test;
    for (const auto& r : dataset.records) {
        switch (r.split) {
            case Split::Labeled:
                if (!r.label) throw DataError("labeled sample " + std::to_string(r.id) + " has no label");
                labeled[r.id] = *r.label;
                break;
            case Split::Unlabeled: unlabeled.insert(r.id); break;
            case Split::Test:
                if (!r.label) throw DataError("test sample " + std::to_string(r.id) + " has no label");
                test.insert(r.id);
                break;
        }
    }
    if (labeled.empty() || test.empty()) throw DataError("file split tags leave the labeled or test part empty");
    return SamplePool(dataset.size(), std::move(labeled), std::move(unlabeled), std::move(test));
}

Dataset with_split_tags(Dataset dataset, const SamplePool& pool) {
    for (auto& r : dataset.records) {
        if (pool.labeled().contains(r.id)) r.split = Split::Labeled;
        else if (pool.test().contains(r.id)) r.split = Split::Test;
        else r.split = Split::Unlabeled;
    }
    return dataset;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

Dataset read_features(std::istream& in, const IngestSchema& schema, std::string_view source) {
    const std::string src(source);
    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError(src + ": empty feature file");
    header_line = trim_cr(header_line);
    const auto header = split_fields(header_line);

    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!column.emplace(std::string(header[i]), i).second) {
            throw DataError(src + ": duplicate column '" + std::string(header[i]) + "'");
        }
    }
    for (const char* required : {"id", "split", "label"})
        if (!column.contains(required)) throw DataError(src + ": missing column '" + std::string(required) + "'");

    auto feature_columns = [&](const std::string& prefix) {
        std::size_t count = 0;
        for (const auto& [name, idx] : column)
            if (name.starts_with(prefix)) ++count;
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < std::max<std::size_t>(count, 1); ++k) {
            auto it = column.find(prefix + std::to_string(k));
            if (it == column.end()) throw DataError(src + ": missing column '" + prefix + std::to_string(k) + "'");
            idx.push_back(it->second);
        }
        return idx;
    };
    const auto eeg_cols = feature_columns("eeg_");
    const auto face_cols = feature_columns("face_");
    const bool has_subject = column.contains("subject");
    if (schema.valence_threshold && schema.num_classes != 2) {
        throw ConfigError("valence binarization requires exactly two classes");
    }

    Dataset ds;
    ds.eeg_dim = eeg_cols.size();
    ds.face_dim = face_cols.size();
    ds.num_classes = schema.num_classes;

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_cr(line);
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = src + ":" + std::to_string(line_no) + ": ";
        if (fields.size() != header.size()) {
            throw DataError(where + "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        try {
            FeatureRecord rec;
            rec.id = static_cast<SampleId>(parse_int(fields[column.at("id")], "id"));
            rec.split = parse_split(fields[column.at("split")]);
            const auto label_text = fields[column.at("label")];
            if (!label_text.empty()) {
                if (schema.valence_threshold) {
                    const double score = parse_double(label_text, "valence score");
                    if (score < 1.0 || score > 9.0) throw DataError("valence score outside [1, 9]");
                    rec.label = score >= *schema.valence_threshold ? 1 : 0;
                } else {
                    const auto label = parse_int(label_text, "label");
                    if (label < 0 || static_cast<std::size_t>(label) >= schema.num_classes) {
                        throw DataError("label " + std::to_string(label) + " outside [0, " +
                                        std::to_string(schema.num_classes) + ")");
                    }
                    rec.label = static_cast<int>(label);
                }
            }
            if (has_subject && !fields[column.at("subject")].empty()) {
                rec.subject = static_cast<int>(parse_int(fields[column.at("subject")], "subject"));
            }
            for (auto c : eeg_cols) rec.eeg.push_back(parse_double(fields[c], header[c]));
            for (auto c : face_cols) rec.face.push_back(parse_double(fields[c], header[c]));
            ds.records.push_back(std::move(rec));
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
    }

    std::sort(ds.records.begin(), ds.records.end(),
              [](const FeatureRecord& a, const FeatureRecord& b) { return a.id < b.id; });
    ds.validate();
    return ds;
}

Dataset ingest(const std::filesystem::path& path, const IngestSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature file " + path.string());
    return read_features(in, schema, path.string());
}

void write_features(std::ostream& out, const Dataset& dataset) {
    const bool has_subject = std::any_of(dataset.records.begin(), dataset.records.end(),
                                         [](const FeatureRecord& r) { return r.subject.has_value(); });
    out << "id,split,label";
    if (has_subject) out << ",subject";
    for (std::size_t k = 0; k < dataset.eeg_dim; ++k) out << ",eeg_" << k;
    for (std::size_t k = 0; k < dataset.face_dim; ++k) out << ",face_" << k;
    out << '\n';
    for (const auto& r : dataset.records) {
        out << r.id << ',' << to_string(r.split) << ',';
        if (r.label) out << *r.label;
        if (has_subject) {
            out << ',';
            if (r.subject) out << *r.subject;
        }
        for (double v : r.eeg) out << ',' << format_double(v);
        for (double v : r.face) out << ',' << format_double(v);
        out << '\n';
    }
}

void export_features(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature file " + path.string());
    write_features(out, dataset);
}

}  // namespace xmal
