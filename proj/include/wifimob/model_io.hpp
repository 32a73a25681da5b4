#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wifimob/classify.hpp"
#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/eval.hpp"
#include "wifimob/gpr.hpp"

namespace wifimob {

// Model persistence. Every model file shares one envelope:
//
//   wifimob-model v1
//   type: gpr | tree | nb | forest
//   checksum: <16 hex digits, FNV-1a 64 of the payload bytes>
//   ---
//   <type-specific payload lines>
//
// Payload numbers use shortest round-trip formatting, so save/load is
// value-exact. Payload lines starting with "config " carry the resolved run
// configuration and are ignored by the parsers (but covered by the
// checksum). Loading a regression model recomputes its factorization.

inline constexpr const char* kModelMagic = "wifimob-model v1";

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string checksum_hex(std::string_view payload) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(payload);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

struct ModelFile {
    std::string type;
    std::string payload;
};

inline void write_model_file(std::ostream& out, const std::string& type,
                             const std::string& payload) {
    out << kModelMagic << "\n";
    out << "type: " << type << "\n";
    out << "checksum: " << checksum_hex(payload) << "\n";
    out << "---\n";
    out << payload;
}

/// Reads and verifies the envelope; returns the declared type and the raw
/// payload. Version, structure, or checksum problems are DataErrors.
inline ModelFile read_model_file(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kModelMagic) throw DataError("model file format marker \"" + line + "\" unrecognized");

    ModelFile f;
    if (!std::getline(in, line)) throw DataError("model file truncated before type");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("type: ", 0) != 0) throw DataError("model file missing type line");
    f.type = line.substr(6);

    if (!std::getline(in, line)) throw DataError("model file truncated before checksum");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("checksum: ", 0) != 0) throw DataError("model file missing checksum line");
    const std::string declared = line.substr(10);

    if (!std::getline(in, line)) throw DataError("model file truncated before payload");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "---") throw DataError("model file missing payload separator");

    std::ostringstream payload;
    payload << in.rdbuf();
    f.payload = payload.str();
    const std::string actual = checksum_hex(f.payload);
    if (actual != declared)
        throw DataError("model checksum mismatch: declared " + declared + ", payload has " +
                        actual);
    return f;
}

namespace detail {

inline void check_token_name(const std::string& name, const char* what) {
    if (name.empty() || name.find(' ') != std::string::npos ||
        name.find('\n') != std::string::npos)
        throw DataError(std::string(what) + " \"" + name + "\" cannot be serialized");
}

inline std::vector<std::string> payload_lines(const std::string& payload) {
    std::vector<std::string> lines;
    std::string cur;
    std::istringstream in(payload);
    while (std::getline(in, cur)) {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        if (cur.empty()) continue;
        if (cur.rfind("config ", 0) == 0) continue;
        lines.push_back(cur);
    }
    return lines;
}

inline std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

class PayloadParser {
public:
    explicit PayloadParser(const std::string& payload) : lines_(payload_lines(payload)) {}

    bool done() const { return at_ >= lines_.size(); }

    /// Next line's tokens; the first token must equal `key`.
    std::vector<std::string> expect(const char* key) {
        if (done()) throw DataError(std::string("model payload truncated, expected ") + key);
        auto toks = tokens_of(lines_[at_++]);
        if (toks.empty() || toks[0] != key)
            throw DataError(std::string("model payload expected \"") + key + "\", got \"" +
                            (toks.empty() ? "" : toks[0]) + "\"");
        return toks;
    }

    double num(const std::vector<std::string>& toks, std::size_t i) {
        if (i >= toks.size()) throw DataError("model payload line too short");
        auto v = parse_double(toks[i]);
        if (!v) throw DataError("model payload number \"" + toks[i] + "\" unparsable");
        return *v;
    }

    std::int64_t integer(const std::vector<std::string>& toks, std::size_t i) {
        if (i >= toks.size()) throw DataError("model payload line too short");
        auto v = parse_int(toks[i]);
        if (!v) throw DataError("model payload integer \"" + toks[i] + "\" unparsable");
        return *v;
    }

private:
    std::vector<std::string> lines_;
    std::size_t at_ = 0;
};

inline void append_config_lines(std::ostringstream& out,
                                const std::vector<std::string>& config_lines) {
    for (const auto& line : config_lines) out << "config " << line << "\n";
}

inline void append_tree_nodes(std::ostringstream& out, const TreeModel& m) {
    out << "nodes " << fmt_uint(m.nodes.size()) << "\n";
    for (const auto& n : m.nodes) {
        if (n.is_leaf) {
            out << "node leaf";
        } else {
            out << "node split " << fmt_uint(n.feature) << " " << fmt_double(n.threshold) << " "
                << fmt_uint(n.left) << " " << fmt_uint(n.right) << " "
                << (n.missing_left ? 1 : 0);
        }
        for (auto c : n.counts) out << " " << fmt_uint(c);
        out << "\n";
    }
}

inline std::vector<TreeNode> parse_tree_nodes(PayloadParser& p) {
    auto head = p.expect("nodes");
    const auto count = static_cast<std::size_t>(p.integer(head, 1));
    std::vector<TreeNode> nodes;
    nodes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto toks = p.expect("node");
        if (toks.size() < 2) throw DataError("model payload node line too short");
        TreeNode n;
        std::size_t counts_at;
        if (toks[1] == "leaf") {
            n.is_leaf = true;
            counts_at = 2;
        } else if (toks[1] == "split") {
            n.is_leaf = false;
            n.feature = static_cast<std::size_t>(p.integer(toks, 2));
            n.threshold = p.num(toks, 3);
            n.left = static_cast<std::size_t>(p.integer(toks, 4));
            n.right = static_cast<std::size_t>(p.integer(toks, 5));
            n.missing_left = p.integer(toks, 6) != 0;
            counts_at = 7;
        } else {
            throw DataError("model payload node kind \"" + toks[1] + "\" unrecognized");
        }
        std::size_t total = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            n.counts[c] = static_cast<std::size_t>(p.integer(toks, counts_at + c));
            total += n.counts[c];
        }
        if (total == 0) throw DataError("model payload node has empty class counts");
        n.majority = detail::majority_of(n.counts);
        nodes.push_back(n);
    }
    for (const auto& n : nodes) {
        if (!n.is_leaf && (n.left >= nodes.size() || n.right >= nodes.size()))
            throw DataError("model payload node child index out of range");
    }
    return nodes;
}

inline void append_feature_names(std::ostringstream& out, const std::vector<std::string>& names) {
    out << "features " << fmt_uint(names.size());
    for (const auto& n : names) {
        check_token_name(n, "feature name");
        out << " " << n;
    }
    out << "\n";
}

inline std::vector<std::string> parse_feature_names(PayloadParser& p) {
    auto toks = p.expect("features");
    const auto count = static_cast<std::size_t>(p.integer(toks, 1));
    if (toks.size() != count + 2) throw DataError("model payload feature list length mismatch");
    return {toks.begin() + 2, toks.end()};
}

}  // namespace detail

inline std::string gpr_payload(const GprModel& m,
                               const std::vector<std::string>& config_lines = {}) {
    std::ostringstream out;
    detail::append_config_lines(out, config_lines);
    out << "signal_variance " << fmt_double(m.hyperparams.signal_variance) << "\n";
    out << "length_scale " << fmt_double(m.hyperparams.length_scale) << "\n";
    out << "noise_variance " << fmt_double(m.hyperparams.noise_variance) << "\n";
    out << "n " << fmt_uint(m.train_x.size()) << "\n";
    out << "x";
    for (double v : m.train_x) out << " " << fmt_double(v);
    out << "\n";
    out << "y";
    for (double v : m.train_y) out << " " << fmt_double(v);
    out << "\n";
    return out.str();
}

inline GprModel parse_gpr_payload(const std::string& payload) {
    detail::PayloadParser p(payload);
    GprHyperparams hp;
    hp.signal_variance = p.num(p.expect("signal_variance"), 1);
    hp.length_scale = p.num(p.expect("length_scale"), 1);
    hp.noise_variance = p.num(p.expect("noise_variance"), 1);
    const auto n = static_cast<std::size_t>(p.integer(p.expect("n"), 1));
    auto xs = p.expect("x");
    auto ys = p.expect("y");
    if (xs.size() != n + 1 || ys.size() != n + 1)
        throw DataError("model payload training array length mismatch");
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = p.num(xs, i + 1);
        y[i] = p.num(ys, i + 1);
    }
    return assemble_gpr(hp, std::move(x), std::move(y));
}

inline std::string tree_payload(const TreeModel& m,
                                const std::vector<std::string>& config_lines = {}) {
    std::ostringstream out;
    detail::append_config_lines(out, config_lines);
    detail::append_feature_names(out, m.feature_names);
    detail::append_tree_nodes(out, m);
    return out.str();
}

inline TreeModel parse_tree_payload(const std::string& payload) {
    detail::PayloadParser p(payload);
    TreeModel m;
    m.feature_names = detail::parse_feature_names(p);
    m.nodes = detail::parse_tree_nodes(p);
    return m;
}

inline std::string naive_bayes_payload(const NaiveBayesModel& m,
                                       const std::vector<std::string>& config_lines = {}) {
    std::ostringstream out;
    detail::append_config_lines(out, config_lines);
    detail::append_feature_names(out, m.feature_names);
    out << "classes " << fmt_uint(m.classes.size());
    for (auto c : m.classes) out << " " << to_string(c);
    out << "\n";
    out << "priors";
    for (double v : m.priors) out << " " << fmt_double(v);
    out << "\n";
    for (std::size_t ci = 0; ci < m.classes.size(); ++ci) {
        out << "mean " << to_string(m.classes[ci]);
        for (double v : m.means[ci]) out << " " << fmt_double(v);
        out << "\n";
        out << "var " << to_string(m.classes[ci]);
        for (double v : m.variances[ci]) out << " " << fmt_double(v);
        out << "\n";
    }
    return out.str();
}

inline NaiveBayesModel parse_naive_bayes_payload(const std::string& payload) {
    detail::PayloadParser p(payload);
    NaiveBayesModel m;
    m.feature_names = detail::parse_feature_names(p);
    const std::size_t arity = m.feature_names.size();

    auto cls = p.expect("classes");
    const auto n_classes = static_cast<std::size_t>(p.integer(cls, 1));
    if (cls.size() != n_classes + 2) throw DataError("model payload class list length mismatch");
    for (std::size_t i = 0; i < n_classes; ++i) {
        auto l = label_from_string(cls[i + 2]);
        if (!l || *l == ActivityLabel::unknown)
            throw DataError("model payload class \"" + cls[i + 2] + "\" unrecognized");
        m.classes.push_back(*l);
    }
    auto priors = p.expect("priors");
    if (priors.size() != n_classes + 1) throw DataError("model payload prior count mismatch");
    for (std::size_t i = 0; i < n_classes; ++i) m.priors.push_back(p.num(priors, i + 1));

    for (std::size_t ci = 0; ci < n_classes; ++ci) {
        auto mean = p.expect("mean");
        auto var = p.expect("var");
        if (mean.size() != arity + 2 || var.size() != arity + 2)
            throw DataError("model payload moment row length mismatch");
        if (mean[1] != to_string(m.classes[ci]) || var[1] != to_string(m.classes[ci]))
            throw DataError("model payload moment rows out of order");
        std::vector<double> mu(arity), v2(arity);
        for (std::size_t f = 0; f < arity; ++f) {
            mu[f] = p.num(mean, f + 2);
            v2[f] = p.num(var, f + 2);
            if (!(v2[f] > 0)) throw DataError("model payload variance must be positive");
        }
        m.means.push_back(std::move(mu));
        m.variances.push_back(std::move(v2));
    }
    return m;
}

inline std::string forest_payload(const ForestModel& m,
                                  const std::vector<std::string>& config_lines = {}) {
    std::ostringstream out;
    detail::append_config_lines(out, config_lines);
    detail::append_feature_names(out, m.feature_names);
    out << "features_per_split " << fmt_uint(m.features_per_split) << "\n";
    out << "seed " << fmt_uint(m.seed) << "\n";
    out << "bootstrap " << (m.bootstrap ? 1 : 0) << "\n";
    out << "trees " << fmt_uint(m.trees.size()) << "\n";
    for (const auto& t : m.trees) detail::append_tree_nodes(out, t);
    return out.str();
}

inline ForestModel parse_forest_payload(const std::string& payload) {
    detail::PayloadParser p(payload);
    ForestModel m;
    m.feature_names = detail::parse_feature_names(p);
    m.features_per_split = static_cast<std::size_t>(p.integer(p.expect("features_per_split"), 1));
    auto seed_toks = p.expect("seed");
    if (seed_toks.size() < 2) throw DataError("model payload line too short");
    auto seed = parse_uint(seed_toks[1]);
    if (!seed) throw DataError("model payload seed unparsable");
    m.seed = *seed;
    m.bootstrap = p.integer(p.expect("bootstrap"), 1) != 0;
    const auto n_trees = static_cast<std::size_t>(p.integer(p.expect("trees"), 1));
    for (std::size_t t = 0; t < n_trees; ++t) {
        TreeModel tree;
        tree.feature_names = m.feature_names;
        tree.nodes = detail::parse_tree_nodes(p);
        m.trees.push_back(std::move(tree));
    }
    if (m.trees.empty()) throw DataError("model payload forest has no trees");
    return m;
}

inline void save_model(std::ostream& out, const GprModel& m,
                       const std::vector<std::string>& config_lines = {}) {
    write_model_file(out, "gpr", gpr_payload(m, config_lines));
}
inline void save_model(std::ostream& out, const TreeModel& m,
                       const std::vector<std::string>& config_lines = {}) {
    write_model_file(out, "tree", tree_payload(m, config_lines));
}
inline void save_model(std::ostream& out, const NaiveBayesModel& m,
                       const std::vector<std::string>& config_lines = {}) {
    write_model_file(out, "nb", naive_bayes_payload(m, config_lines));
}
inline void save_model(std::ostream& out, const ForestModel& m,
                       const std::vector<std::string>& config_lines = {}) {
    write_model_file(out, "forest", forest_payload(m, config_lines));
}

namespace detail {

inline void check_type(const ModelFile& f, const char* want) {
    if (f.type != want)
        throw DataError(std::string("model file is of type ") + f.type + ", expected " + want);
}

}  // namespace detail

inline GprModel load_gpr(std::istream& in) {
    auto f = read_model_file(in);
    detail::check_type(f, "gpr");
    return parse_gpr_payload(f.payload);
}

inline TreeModel load_tree(std::istream& in) {
    auto f = read_model_file(in);
    detail::check_type(f, "tree");
    return parse_tree_payload(f.payload);
}

inline NaiveBayesModel load_naive_bayes(std::istream& in) {
    auto f = read_model_file(in);
    detail::check_type(f, "nb");
    return parse_naive_bayes_payload(f.payload);
}

inline ForestModel load_forest(std::istream& in) {
    auto f = read_model_file(in);
    detail::check_type(f, "forest");
    return parse_forest_payload(f.payload);
}

using ClassifierModel = std::variant<TreeModel, NaiveBayesModel, ForestModel>;

/// Loads whichever classifier the file declares (regression files are
/// rejected here; use load_gpr).
inline ClassifierModel load_classifier(std::istream& in) {
    auto f = read_model_file(in);
    if (f.type == "tree") return parse_tree_payload(f.payload);
    if (f.type == "nb") return parse_naive_bayes_payload(f.payload);
    if (f.type == "forest") return parse_forest_payload(f.payload);
    throw DataError("model file type \"" + f.type + "\" is not a classifier");
}

inline Prediction predict_label(const ClassifierModel& m, const FeatureRow& row) {
    return std::visit([&](const auto& inner) { return predict_label(inner, row); }, m);
}

inline EvalReport evaluate(const ClassifierModel& m, const std::vector<FeatureRecord>& test) {
    return std::visit([&](const auto& inner) { return evaluate(inner, test); }, m);
}

}  // namespace wifimob
