#include "fmgnn/graph.hpp"

#include "fmgnn/errors.hpp"
#include "fmgnn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fmgnn {

namespace {

// Whitespace tokenizer over one line of a data file.
class line_reader {
public:
    line_reader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
        if (!in_) throw parse_error(path_, 0, "cannot open file");
    }

    // Next non-blank, non-comment line; false at end of file.
    bool next() {
        while (std::getline(in_, line_)) {
            ++number_;
            pos_ = 0;
            skip_space();
            if (pos_ < line_.size() && line_[pos_] != '#') return true;
        }
        return false;
    }

    bool at_end() {
        skip_space();
        return pos_ >= line_.size();
    }

    std::string_view token() {
        skip_space();
        const std::size_t begin = pos_;
        while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
        if (begin == pos_) fail("unexpected end of line");
        return std::string_view(line_).substr(begin, pos_ - begin);
    }

    long long integer() {
        auto t = token();
        long long v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) fail("expected an integer, got '" + std::string(t) + "'");
        return v;
    }

    double real() {
        auto t = token();
        double v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) {
            fail("expected a finite real, got '" + std::string(t) + "'");
        }
        return v;
    }

    std::size_t node_id(std::size_t num_nodes) {
        const long long v = integer();
        if (v < 0 || static_cast<unsigned long long>(v) >= num_nodes) {
            fail("node id " + std::to_string(v) + " outside [0, " + std::to_string(num_nodes) + ")");
        }
        return static_cast<std::size_t>(v);
    }

    [[noreturn]] void fail(const std::string& what) const { throw parse_error(path_, number_, what); }

    const std::string& path() const { return path_; }
    std::size_t line_number() const { return number_; }

private:
    void skip_space() {
        while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
    }

    std::string path_;
    std::ifstream in_;
    std::string line_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

std::size_t checked_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

} // namespace

graph make_graph(std::size_t num_nodes, std::vector<edge> edges, std::size_t feature_dim,
                 std::vector<double> features, std::vector<int> labels) {
    if (features.size() != num_nodes * feature_dim) throw dimension_error("graph: feature matrix size mismatch");
    if (labels.empty()) labels.assign(num_nodes, -1);
    if (labels.size() != num_nodes) throw dimension_error("graph: one label per node required");

    graph g;
    g.num_nodes = num_nodes;
    g.feature_dim = feature_dim;
    g.features = std::move(features);
    for (auto& e : edges) {
        if (e.u >= num_nodes || e.v >= num_nodes) throw contract_error("graph: edge endpoint out of range");
        if (e.u == e.v) continue;
        g.edges.push_back(make_edge(e.u, e.v));
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    for (int l : labels) {
        if (l < -1) throw contract_error("graph: label below -1");
        g.num_classes = std::max(g.num_classes, l + 1);
    }
    g.labels = std::move(labels);
    return g;
}

graph load_graph(const std::filesystem::path& edges_path, const std::filesystem::path& features_path,
                 const std::filesystem::path& labels_path) {
    // Features fix the node count.
    std::vector<std::vector<double>> rows;
    std::vector<bool> seen;
    std::size_t dim = 0;
    {
        line_reader r(features_path);
        std::vector<std::pair<long long, std::vector<double>>> raw;
        std::vector<std::size_t> lines;
        while (r.next()) {
            const long long id = r.integer();
            std::vector<double> row;
            while (!r.at_end()) row.push_back(r.real());
            if (raw.empty()) {
                dim = row.size();
            } else if (row.size() != dim) {
                r.fail("expected " + std::to_string(dim) + " feature values, got " + std::to_string(row.size()));
            }
            raw.emplace_back(id, std::move(row));
            lines.push_back(r.line_number());
        }
        const std::size_t n = raw.size();
        if (n == 0) throw parse_error(r.path(), 0, "no nodes");
        rows.resize(n);
        seen.assign(n, false);
        for (std::size_t k = 0; k < n; ++k) {
            const long long id = raw[k].first;
            if (id < 0 || static_cast<std::size_t>(id) >= n) {
                throw parse_error(r.path(), lines[k],
                                  "node id " + std::to_string(id) + " outside [0, " + std::to_string(n) + ")");
            }
            if (seen[id]) throw parse_error(r.path(), lines[k], "duplicate node id " + std::to_string(id));
            seen[id] = true;
            rows[id] = std::move(raw[k].second);
        }
    }
    const std::size_t n = rows.size();
    std::vector<double> features;
    features.reserve(n * dim);
    for (auto& row : rows) features.insert(features.end(), row.begin(), row.end());

    std::vector<edge> edges;
    {
        line_reader r(edges_path);
        while (r.next()) {
            const std::size_t a = r.node_id(n);
            const std::size_t b = r.node_id(n);
            if (!r.at_end()) r.fail("expected exactly two node ids");
            edges.push_back(make_edge(a, b));
        }
    }

    std::vector<int> labels(n, -1);
    {
        line_reader r(labels_path);
        while (r.next()) {
            const std::size_t id = r.node_id(n);
            const long long l = r.integer();
            if (l < -1 || l > 1'000'000) r.fail("unknown label " + std::to_string(l));
            if (!r.at_end()) r.fail("expected node id and label only");
            labels[id] = static_cast<int>(l);
        }
    }
    return make_graph(n, std::move(edges), dim, std::move(features), std::move(labels));
}

void save_graph(const graph& g, const std::filesystem::path& edges_path,
                const std::filesystem::path& features_path, const std::filesystem::path& labels_path) {
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p);
        if (!out) throw parse_error(p.string(), 0, "cannot open file for writing");
        out.precision(17);
        return out;
    };
    {
        auto out = open(edges_path);
        for (const auto& e : g.edges) out << e.u << ' ' << e.v << '\n';
    }
    {
        auto out = open(features_path);
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            out << i;
            for (double x : g.feature_row(i)) out << ' ' << x;
            out << '\n';
        }
    }
    {
        auto out = open(labels_path);
        for (std::size_t i = 0; i < g.num_nodes; ++i) out << i << ' ' << g.labels[i] << '\n';
    }
}

void row_normalize_features(graph& g) {
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.feature_dim; ++j) s += std::abs(g.features[i * g.feature_dim + j]);
        if (s == 0.0) continue;
        for (std::size_t j = 0; j < g.feature_dim; ++j) g.features[i * g.feature_dim + j] /= s;
    }
}

ad::csr_matrix feature_matrix(const graph& g) {
    ad::csr_matrix m;
    m.rows = g.num_nodes;
    m.cols = g.feature_dim;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        for (std::size_t j = 0; j < g.feature_dim; ++j) {
            const double x = g.features[i * g.feature_dim + j];
            if (x == 0.0) continue;
            m.col_idx.push_back(j);
            m.values.push_back(x);
        }
        m.row_ptr.push_back(m.values.size());
    }
    return m;
}

ad::csr_matrix normalize_adjacency(std::size_t num_nodes, std::span<const edge> edges) {
    std::vector<std::vector<std::size_t>> nbrs(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) nbrs[i].push_back(i);
    for (const auto& e : edges) {
        if (e.u >= num_nodes || e.v >= num_nodes) throw contract_error("normalize_adjacency: edge out of range");
        if (e.u == e.v) continue;
        nbrs[e.u].push_back(e.v);
        nbrs[e.v].push_back(e.u);
    }
    std::vector<double> degree(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        auto& row = nbrs[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        degree[i] = static_cast<double>(row.size());
    }
    ad::csr_matrix a;
    a.rows = a.cols = num_nodes;
    for (std::size_t i = 0; i < num_nodes; ++i) {
        for (std::size_t j : nbrs[i]) {
            a.col_idx.push_back(j);
            a.values.push_back(1.0 / std::sqrt(degree[i] * degree[j]));
        }
        a.row_ptr.push_back(a.values.size());
    }
    return a;
}

edge_set::edge_set(std::size_t num_nodes, std::span<const edge> edges) : n_(num_nodes) {
    set_.reserve(edges.size() * 2);
    for (const auto& e : edges) set_.insert(key(make_edge(e.u, e.v)));
}

std::vector<edge> sample_negatives(std::size_t num_nodes, const edge_set& taken, std::size_t count,
                                   std::mt19937_64& rng, const edge_set* excluded) {
    std::vector<edge> out;
    if (count == 0) return out;
    const std::uint64_t pairs = static_cast<std::uint64_t>(num_nodes) * (num_nodes - (num_nodes > 0)) / 2;
    const std::uint64_t blocked = taken.size() + (excluded ? excluded->size() : 0);
    auto allowed = [&](std::size_t a, std::size_t b) {
        return !taken.contains(a, b) && !(excluded && excluded->contains(a, b));
    };

    if (pairs < blocked + 4 * static_cast<std::uint64_t>(count)) {
        std::vector<edge> pool;
        for (std::size_t a = 0; a < num_nodes; ++a) {
            for (std::size_t b = a + 1; b < num_nodes; ++b) {
                if (allowed(a, b)) pool.push_back({a, b});
            }
        }
        if (pool.size() < count) {
            throw split_error("negative sampling: " + std::to_string(count) + " non-edges requested, only " +
                              std::to_string(pool.size()) + " available");
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(count);
        return pool;
    }

    edge_set picked(num_nodes, {});
    std::uniform_int_distribution<std::size_t> node(0, num_nodes - 1);
    out.reserve(count);
    while (out.size() < count) {
        const std::size_t a = node(rng);
        const std::size_t b = node(rng);
        if (a == b || !allowed(a, b)) continue;
        const edge e = make_edge(a, b);
        if (picked.insert(e)) out.push_back(e);
    }
    return out;
}

std::string_view to_string(task_kind t) noexcept { return t == task_kind::nc ? "nc" : "lp"; }

task_kind parse_task(std::string_view s) {
    if (s == "nc") return task_kind::nc;
    if (s == "lp") return task_kind::lp;
    throw contract_error("unknown task '" + std::string(s) + "' (expected nc or lp)");
}

split_manifest make_nc_split(const graph& g, const nc_policy& policy, std::uint64_t seed) {
    auto rng = seed_tree(seed).stream("split");
    split_manifest s;
    s.task = task_kind::nc;
    s.seed = seed;

    std::vector<std::size_t> labeled;
    std::vector<std::size_t> per_class(static_cast<std::size_t>(g.num_classes), 0);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (g.labels[i] < 0) continue;
        labeled.push_back(i);
        ++per_class[g.labels[i]];
    }
    if (labeled.empty()) throw split_error("nc split: graph has no labeled nodes");
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c] == 0) throw split_error("nc split: class " + std::to_string(c) + " has no labeled nodes");
    }
    std::shuffle(labeled.begin(), labeled.end(), rng);

    if (const auto* p = std::get_if<planetoid_policy>(&policy)) {
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            if (per_class[c] < p->per_class) {
                throw split_error("nc split: class " + std::to_string(c) + " has " + std::to_string(per_class[c]) +
                                  " labeled nodes, " + std::to_string(p->per_class) + " needed");
            }
        }
        std::vector<std::size_t> taken(per_class.size(), 0);
        std::vector<std::size_t> rest;
        for (std::size_t i : labeled) {
            auto& t = taken[g.labels[i]];
            if (t < p->per_class) {
                s.train_nodes.push_back(i);
                ++t;
            } else {
                rest.push_back(i);
            }
        }
        if (rest.size() < p->val + p->test) {
            throw split_error("nc split: " + std::to_string(rest.size()) + " nodes left for " +
                              std::to_string(p->val) + " validation and " + std::to_string(p->test) + " test");
        }
        s.val_nodes.assign(rest.begin(), rest.begin() + p->val);
        s.test_nodes.assign(rest.begin() + p->val, rest.begin() + p->val + p->test);
    } else {
        const auto& f = std::get<fractional_policy>(policy);
        if (f.p_train <= 0.0 || f.p_val < 0.0 || f.p_train + f.p_val > 1.0) {
            throw split_error("nc split: fractions must satisfy 0 < p_train, 0 <= p_val, p_train + p_val <= 1");
        }
        const std::size_t n = labeled.size();
        const std::size_t n_train = checked_count(f.p_train, n);
        const std::size_t n_val = checked_count(f.p_val, n);
        if (n_train == 0) throw split_error("nc split: empty training set");
        s.train_nodes.assign(labeled.begin(), labeled.begin() + n_train);
        s.val_nodes.assign(labeled.begin() + n_train, labeled.begin() + n_train + n_val);
        s.test_nodes.assign(labeled.begin() + n_train + n_val, labeled.end());
    }
    std::sort(s.train_nodes.begin(), s.train_nodes.end());
    std::sort(s.val_nodes.begin(), s.val_nodes.end());
    std::sort(s.test_nodes.begin(), s.test_nodes.end());
    return s;
}

split_manifest make_lp_split(const graph& g, std::uint64_t seed) {
    if (g.edges.size() < 20) {
        throw split_error("lp split: graph has " + std::to_string(g.edges.size()) + " edges, at least 20 needed");
    }
    auto rng = seed_tree(seed).stream("split");
    split_manifest s;
    s.task = task_kind::lp;
    s.seed = seed;

    std::vector<edge> shuffled = g.edges;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const std::size_t m = shuffled.size();
    const std::size_t n_val = checked_count(0.05, m);
    const std::size_t n_test = checked_count(0.10, m);
    s.val_edges.assign(shuffled.begin(), shuffled.begin() + n_val);
    s.test_edges.assign(shuffled.begin() + n_val, shuffled.begin() + n_val + n_test);
    s.train_edges.assign(shuffled.begin() + n_val + n_test, shuffled.end());
    std::sort(s.train_edges.begin(), s.train_edges.end());
    std::sort(s.val_edges.begin(), s.val_edges.end());
    std::sort(s.test_edges.begin(), s.test_edges.end());

    const edge_set all(g.num_nodes, g.edges);
    auto negatives = sample_negatives(g.num_nodes, all, n_val + n_test, rng);
    s.val_negatives.assign(negatives.begin(), negatives.begin() + n_val);
    s.test_negatives.assign(negatives.begin() + n_val, negatives.end());
    return s;
}

void validate_split(const graph& g, const split_manifest& s) {
    if (s.task == task_kind::nc) {
        std::vector<int> owner(g.num_nodes, -1);
        const std::vector<std::size_t>* parts[] = {&s.train_nodes, &s.val_nodes, &s.test_nodes};
        for (int p = 0; p < 3; ++p) {
            for (std::size_t i : *parts[p]) {
                if (i >= g.num_nodes) throw split_error("split: node " + std::to_string(i) + " out of range");
                if (owner[i] != -1) throw split_error("split: node " + std::to_string(i) + " in two sets");
                if (g.labels[i] < 0) throw split_error("split: node " + std::to_string(i) + " is unlabeled");
                owner[i] = p;
            }
        }
        if (s.train_nodes.empty()) throw split_error("split: empty training set");
        return;
    }
    const edge_set all(g.num_nodes, g.edges);
    for (const auto* part : {&s.train_edges, &s.val_edges, &s.test_edges}) {
        for (const auto& e : *part) {
            if (e.u >= g.num_nodes || e.v >= g.num_nodes || !all.contains(e.u, e.v)) {
                throw split_error("split: positive edge not in graph");
            }
        }
    }
    const edge_set train(g.num_nodes, s.train_edges);
    for (const auto* part : {&s.val_edges, &s.test_edges}) {
        for (const auto& e : *part) {
            if (train.contains(e.u, e.v)) throw split_error("split: held-out edge present in training edges");
        }
    }
    if (s.val_negatives.size() != s.val_edges.size() || s.test_negatives.size() != s.test_edges.size()) {
        throw split_error("split: negative counts must equal positive counts");
    }
    edge_set negs(g.num_nodes, {});
    for (const auto* part : {&s.val_negatives, &s.test_negatives}) {
        for (const auto& e : *part) {
            if (e.u >= g.num_nodes || e.v >= g.num_nodes || e.u == e.v || all.contains(e.u, e.v)) {
                throw split_error("split: negative edge is an edge of the graph");
            }
            if (!negs.insert(make_edge(e.u, e.v))) throw split_error("split: repeated negative edge");
        }
    }
}

namespace {

nlohmann::json edges_json(const std::vector<edge>& es) {
    auto a = nlohmann::json::array();
    for (const auto& e : es) a.push_back({e.u, e.v});
    return a;
}

std::vector<edge> edges_from(const nlohmann::json& a) {
    std::vector<edge> out;
    for (const auto& p : a) {
        if (!p.is_array() || p.size() != 2) throw split_error("split manifest: edges must be [u, v] pairs");
        out.push_back(make_edge(p[0].get<std::size_t>(), p[1].get<std::size_t>()));
    }
    return out;
}

} // namespace

std::string split_to_json(const split_manifest& s) {
    nlohmann::json j;
    j["task"] = std::string(to_string(s.task));
    j["seed"] = s.seed;
    if (s.task == task_kind::nc) {
        j["train"] = s.train_nodes;
        j["val"] = s.val_nodes;
        j["test"] = s.test_nodes;
    } else {
        j["train"] = edges_json(s.train_edges);
        j["val"] = edges_json(s.val_edges);
        j["test"] = edges_json(s.test_edges);
        j["neg_val"] = edges_json(s.val_negatives);
        j["neg_test"] = edges_json(s.test_negatives);
    }
    return j.dump();
}

split_manifest split_from_json(const std::string& text) {
    split_manifest s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.task = parse_task(j.at("task").get<std::string>());
        s.seed = j.at("seed").get<std::uint64_t>();
        if (s.task == task_kind::nc) {
            s.train_nodes = j.at("train").get<std::vector<std::size_t>>();
            s.val_nodes = j.at("val").get<std::vector<std::size_t>>();
            s.test_nodes = j.at("test").get<std::vector<std::size_t>>();
        } else {
            s.train_edges = edges_from(j.at("train"));
            s.val_edges = edges_from(j.at("val"));
            s.test_edges = edges_from(j.at("test"));
            s.val_negatives = edges_from(j.at("neg_val"));
            s.test_negatives = edges_from(j.at("neg_test"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw split_error(std::string("split manifest: ") + e.what());
    }
    return s;
}

graph make_synthetic_graph(const synthetic_config& cfg, std::uint64_t seed) {
    if (cfg.num_nodes < 2 || cfg.num_classes < 1 || cfg.feature_dim < static_cast<std::size_t>(cfg.num_classes)) {
        throw contract_error("synthetic graph: need >= 2 nodes, >= 1 class and a feature block per class");
    }
    const seed_tree tree(seed);
    auto rng = tree.stream("synthetic");
    const std::size_t n = cfg.num_nodes;
    const auto tau = static_cast<std::size_t>(cfg.num_classes);

    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % tau);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<std::vector<std::size_t>> members(tau);
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

    const std::uint64_t max_edges = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const auto target = std::min<std::uint64_t>(
        max_edges / 2, static_cast<std::uint64_t>(std::llround(cfg.average_degree * static_cast<double>(n) / 2.0)));
    std::bernoulli_distribution inside(cfg.homophily);
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    edge_set present(n, {});
    std::vector<edge> edges;
    while (edges.size() < target) {
        const std::size_t a = any(rng);
        std::size_t b = any(rng);
        if (inside(rng) && tau > 1) {
            const auto& same = members[labels[a]];
            b = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
        }
        if (a == b) continue;
        const edge e = make_edge(a, b);
        if (present.insert(e)) edges.push_back(e);
    }

    const std::size_t block = cfg.feature_dim / tau;
    std::bernoulli_distribution own(cfg.feature_density);
    std::bernoulli_distribution noise(cfg.feature_noise);
    std::vector<double> features(n * cfg.feature_dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = static_cast<std::size_t>(labels[i]) * block;
        bool any_on = false;
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
            const bool on = (j >= lo && j < lo + block) ? own(rng) : noise(rng);
            if (on) {
                features[i * cfg.feature_dim + j] = 1.0;
                any_on = true;
            }
        }
        if (!any_on) features[i * cfg.feature_dim + lo] = 1.0;
    }
    return make_graph(n, std::move(edges), cfg.feature_dim, std::move(features), std::move(labels));
}

} // namespace fmgnn
