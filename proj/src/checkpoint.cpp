#include "xmal/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "xmal/error.hpp"
#include "xmal/numfmt.hpp"

namespace xmal {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != last) {
        throw DataError("invalid number '" + std::string(text) + "' for " + std::string(what));
    }
    return v;
}

long long parse_int(std::string_view text, std::string_view what) {
    long long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw DataError("invalid integer '" + std::string(text) + "' for " + std::string(what));
    }
    return v;
}

namespace {

constexpr const char* kMagic = "xmal-checkpoint";
constexpr int kVersion = 1;

std::string expect_key(std::istream& in, const char* key) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(std::string("checkpoint truncated before '") + key + "'");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw DataError(std::string("checkpoint: expected '") + key + "', found '" + k + "'");
    std::string rest;
    std::getline(ls, rest);
    return rest;
}

std::size_t single_size(const std::string& rest, const char* key) {
    std::istringstream ls(rest);
    std::string tok;
    ls >> tok;
    const long long v = parse_int(tok, key);
    if (v < 0) throw DataError(std::string("checkpoint: negative ") + key);
    return static_cast<std::size_t>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    const auto& cfg = params.config();
    out << kMagic << ' ' << kVersion << '\n';
    out << "eeg_dim " << cfg.eeg_dim << '\n';
    out << "face_dim " << cfg.face_dim << '\n';
    out << "hidden";
    for (auto w : cfg.hidden) out << ' ' << w;
    out << '\n';
    out << "embedding_dim " << cfg.embedding_dim << '\n';
    out << "num_classes " << cfg.num_classes << '\n';
    out << "tensors " << params.tensors().size() << '\n';
    for (std::size_t i = 0; i < params.tensors().size(); ++i) {
        const Tensor& t = params.tensors()[i];
        out << "tensor " << params.names()[i] << ' ' << t.rows() << ' ' << t.cols() << '\n';
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (k) out << ' ';
            out << format_double(t[k]);
        }
        out << '\n';
    }
    out << "end\n";
}

ModelParams read_checkpoint(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("checkpoint: empty input");
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kMagic) throw DataError("checkpoint: bad magic '" + magic + "'");
    if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));

    ModelConfig cfg;
    cfg.eeg_dim = single_size(expect_key(in, "eeg_dim"), "eeg_dim");
    cfg.face_dim = single_size(expect_key(in, "face_dim"), "face_dim");
    {
        std::istringstream ls(expect_key(in, "hidden"));
        cfg.hidden.clear();
        std::string tok;
        while (ls >> tok) cfg.hidden.push_back(static_cast<std::size_t>(parse_int(tok, "hidden")));
    }
    cfg.embedding_dim = single_size(expect_key(in, "embedding_dim"), "embedding_dim");
    cfg.num_classes = single_size(expect_key(in, "num_classes"), "num_classes");
    ModelParams params(cfg);
    const std::size_t count = single_size(expect_key(in, "tensors"), "tensors");
    if (count != params.tensors().size()) {
        throw DataError("checkpoint: tensor count " + std::to_string(count) +
                        " does not match architecture (" +
                        std::to_string(params.tensors().size()) + ")");
    }
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream ls(expect_key(in, "tensor"));
        std::string name;
        std::size_t rows = 0, cols = 0;
        ls >> name >> rows >> cols;
        if (name != params.names()[i]) {
            throw DataError("checkpoint: expected tensor '" + params.names()[i] + "', found '" + name + "'");
        }
        Tensor& t = params.tensors()[i];
        if (rows != t.rows() || cols != t.cols()) {
            throw DataError("checkpoint: tensor '" + name + "' has wrong shape");
        }
        std::string line;
        if (!std::getline(in, line)) throw DataError("checkpoint: missing values for '" + name + "'");
        std::istringstream vs(line);
        std::string tok;
        std::size_t k = 0;
        while (vs >> tok) {
            if (k >= t.size()) throw DataError("checkpoint: too many values for '" + name + "'");
            t[k++] = parse_double(tok, name);
        }
        if (k != t.size()) throw DataError("checkpoint: too few values for '" + name + "'");
    }
    expect_key(in, "end");
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace xmal
