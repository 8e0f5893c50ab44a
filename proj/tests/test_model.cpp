#include "fmgnn/autodiff/grad_check.hpp"
#include "fmgnn/errors.hpp"
#include "fmgnn/graph.hpp"
#include "fmgnn/manifold_ops.hpp"
#include "fmgnn/model.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fmgnn;
using ad::tensor;
using fmgnn::testing::max_abs_diff;

namespace {

using vec = std::vector<double>;
constexpr manifold_kind curved[] = {manifold_kind::hyperbolic, manifold_kind::spherical};

tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    return tensor({r, c}, fmgnn::testing::normal_vector(r * c, rng, scale));
}

vec row(const tensor& t, std::size_t i) {
    auto s = t.row_span(i);
    return {s.begin(), s.end()};
}

// Scalar-kernel oracles.
vec exp0_ref(manifold_kind k, const vec& v) {
    auto o = origin(k, v.size());
    return exp_map(o, origin_tangent(k, v)).coords;
}

vec log0_ref(manifold_kind k, const vec& x) {
    auto o = origin(k, k == manifold_kind::euclidean ? x.size() : x.size() - 1);
    return origin_tangent_coords(log_map(o, {k, x}));
}

vec axpy(double a, const vec& x, vec y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
    return y;
}

vec scaled(double a, vec x) {
    for (double& v : x) v *= a;
    return x;
}

// Six-node toy: a path 0-1-2-3 plus a triangle 3-4-5.
graph toy_graph(std::size_t feature_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto f = fmgnn::testing::normal_vector(6 * feature_dim, rng, 0.5);
    return make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {3, 5}}, feature_dim, f, {0, 0, 0, 1, 1, 1});
}

void randomize(model_params& p, std::mt19937_64& rng, double cross_scale = 0.4, double bias_scale = 0.1) {
    for (auto& l : p.layers) {
        for (auto& v : l.cross.data()) v = std::normal_distribution<double>(0.0, cross_scale)(rng);
        for (auto& b : l.bias)
            for (auto& v : b.data()) v = std::normal_distribution<double>(0.0, bias_scale)(rng);
    }
}

double max_diff(const tensor& a, const tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace

TEST_CASE("batched origin maps agree with the scalar kernels") {
    std::mt19937_64 rng(4);
    for (auto k : curved) {
        INFO(to_string(k));
        tensor v = random_tensor(50, 4, rng, 0.8);
        tensor x = exp0(k, v);
        tensor back = log0(k, x);
        for (std::size_t i = 0; i < v.rows(); ++i) {
            CHECK(max_abs_diff(row(x, i), exp0_ref(k, row(v, i))) <= 1e-12);
            CHECK(max_abs_diff(row(back, i), row(v, i)) <= 1e-12);
        }
        CHECK(max_constraint_violation(k, x) <= 1e-12);

        tensor zero({2, 3}, 0.0);
        CHECK(row(exp0(k, zero), 1) == vec{1, 0, 0, 0});
        CHECK(row(log0(k, exp0(k, zero)), 0) == vec{0, 0, 0});
    }
    tensor e = random_tensor(3, 2, rng);
    CHECK(exp0(manifold_kind::euclidean, e).impl() == e.impl());
}

TEST_CASE("batched stereographic bridges and moebius addition") {
    std::mt19937_64 rng(6);
    for (auto k : curved) {
        INFO(to_string(k));
        tensor x = exp0(k, random_tensor(30, 3, rng, 0.7));
        tensor u = to_stereo(k, x);
        CHECK(max_diff(from_stereo(k, u), x) <= 1e-12);
        for (std::size_t i = 0; i < x.rows(); ++i) CHECK(max_abs_diff(row(u, i), ambient_to_stereo({k, row(x, i)})) <= 1e-15);

        const double kappa = curvature(k);
        tensor a = to_stereo(k, exp0(k, random_tensor(30, 3, rng, 0.7)));
        tensor m = mobius_add(a, u, kappa);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            CHECK(max_abs_diff(row(m, i), mobius_add(row(a, i), row(u, i), kappa)) <= 1e-14);
        }
        tensor zero({30, 3}, 0.0);
        CHECK(mobius_add(zero, u, kappa).to_rows() == u.to_rows());
        CHECK(mobius_add(u, zero, kappa).to_rows() == u.to_rows());
    }
    CHECK_THROWS_AS(from_stereo(manifold_kind::hyperbolic, tensor::from_rows({{0.6, 0.8}})), domain_error);
    CHECK_THROWS_AS(to_stereo(manifold_kind::spherical, tensor::from_rows({{-1, 0}})), domain_error);
    CHECK_THROWS_AS(mobius_add(tensor::from_rows({{1.0, 0}}), tensor::from_rows({{1.0, 0}}), 1.0), numerical_error);
}

TEST_CASE("distance matrix") {
    SUBCASE("worked values") {
        auto e = distance_matrix(manifold_kind::euclidean, tensor::from_rows({{3, 4}}), tensor::from_rows({{0, 0}, {3, 4}}));
        CHECK(e(0, 0) == 5.0);
        CHECK(e(0, 1) == 0.0);
        auto h = distance_matrix(manifold_kind::hyperbolic, exp0(manifold_kind::hyperbolic, tensor::from_rows({{1, 0}})),
                                 tensor::from_rows({{1, 0, 0}}));
        // Oracle: acosh(cosh 1).
        CHECK(h(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("agrees with dist and vanishes at centroids") {
        std::mt19937_64 rng(8);
        for (auto k : {manifold_kind::euclidean, manifold_kind::hyperbolic, manifold_kind::spherical}) {
            INFO(to_string(k));
            tensor x = exp0(k, random_tensor(20, 3, rng));
            tensor c = exp0(k, random_tensor(5, 3, rng));
            tensor d = distance_matrix(k, x, c);
            for (std::size_t i = 0; i < 20; ++i)
                for (std::size_t j = 0; j < 5; ++j)
                    CHECK(d(i, j) == doctest::Approx(dist({k, row(x, i)}, {k, row(c, j)})).epsilon(1e-9));
            tensor self = distance_matrix(k, c, c);
            for (std::size_t j = 0; j < 5; ++j) CHECK(self(j, j) <= 1e-7);
        }
    }
    SUBCASE("gradients away from the centroids") {
        std::mt19937_64 rng(10);
        for (auto k : {manifold_kind::euclidean, manifold_kind::hyperbolic, manifold_kind::spherical}) {
            INFO(to_string(k));
            tensor v = random_tensor(6, 3, rng, 0.6);
            tensor c = exp0(k, random_tensor(4, 3, rng, 0.6));
            tensor w = random_tensor(6, 4, rng);
            auto report = ad::grad_check([&] { return ad::sum(distance_matrix(k, exp0(k, v), c) * w); }, {v}, 1e-6, 1e-6);
            CHECK(report.pass);
        }
    }
}

TEST_CASE("batched manifold maps pass grad_check") {
    std::mt19937_64 rng(12);
    for (auto k : curved) {
        INFO(to_string(k));
        tensor v = random_tensor(5, 3, rng, 0.7);
        tensor a = random_tensor(5, 3, rng, 0.3);
        tensor w4 = random_tensor(5, 4, rng);
        tensor w3 = random_tensor(5, 3, rng);
        CHECK(ad::grad_check([&] { return ad::sum(exp0(k, v) * w4); }, {v}).pass);
        CHECK(ad::grad_check([&] { return ad::sum(log0(k, exp0(k, v)) * w3); }, {v}).pass);
        CHECK(ad::grad_check([&] { return ad::sum(to_stereo(k, exp0(k, v)) * w3); }, {v}).pass);
        CHECK(ad::grad_check([&] { return ad::sum(from_stereo(k, a) * w4); }, {a}).pass);
        CHECK(ad::grad_check([&] { return ad::sum(mobius_add(a, mul_scalar(v, 0.2), curvature(k)) * w3); }, {a, v})
                  .pass);
        tensor zero({2, 3}, 0.0);
        tensor w2 = random_tensor(2, 4, rng);
        CHECK(ad::grad_check([&] { return ad::sum(exp0(k, zero) * w2); }, {zero}).pass);
    }
}

TEST_CASE("manifold subsets") {
    CHECK(manifold_set::parse("EHS") == manifold_set{});
    CHECK(manifold_set::parse("HS").name() == "HS");
    CHECK_FALSE(manifold_set::parse("S").has(manifold_kind::euclidean));
    CHECK_THROWS_AS(manifold_set::parse(""), contract_error);
    CHECK_THROWS_AS(manifold_set::parse("EE"), contract_error);
    CHECK_THROWS_AS(manifold_set::parse("EX"), contract_error);
    auto all = manifold_set::all_subsets();
    CHECK(all.back().name() == "EHS");
    CHECK(all.front().name() == "E");
}

TEST_CASE("fusion") {
    std::mt19937_64 rng(14);
    manifold_state s;
    s[manifold_kind::euclidean] = random_tensor(7, 3, rng, 0.5);
    s[manifold_kind::hyperbolic] = exp0(manifold_kind::hyperbolic, random_tensor(7, 3, rng, 0.5));
    s[manifold_kind::spherical] = exp0(manifold_kind::spherical, random_tensor(7, 3, rng, 0.5));
    layer_params p;
    p.cross = tensor({1, 6}, 0.0);
    const manifold_set all;

    SUBCASE("zero coupling is the identity") {
        auto out = fuse_manifolds(s, p, all);
        CHECK(out[manifold_kind::euclidean].to_rows() == s[manifold_kind::euclidean].to_rows());
        CHECK(max_diff(out[manifold_kind::hyperbolic], s[manifold_kind::hyperbolic]) <= 1e-12);
        CHECK(max_diff(out[manifold_kind::spherical], s[manifold_kind::spherical]) <= 1e-12);
    }
    SUBCASE("coupling from a state at the origin changes nothing") {
        p.cross.at(0, h_to_e) = 1.0;
        manifold_state t = s;
        t[manifold_kind::hyperbolic] = exp0(manifold_kind::hyperbolic, tensor({7, 3}, 0.0));
        auto out = fuse_manifolds(t, p, manifold_set::parse("EH"));
        CHECK(out[manifold_kind::euclidean].to_rows() == s[manifold_kind::euclidean].to_rows());
    }
    SUBCASE("single node against a step-by-step evaluation") {
        using enum manifold_kind;
        for (auto& v : p.cross.data()) v = 0.5;
        manifold_state one;
        one[euclidean] = tensor::from_rows({{0.1, 0.0}});
        one[hyperbolic] = exp0(hyperbolic, tensor::from_rows({{0.0, 0.2}}));
        one[spherical] = exp0(spherical, tensor::from_rows({{0.0, 0.1}}));
        auto out = fuse_manifolds(one, p, all);

        const vec e{0.1, 0.0};
        const vec h = exp0_ref(hyperbolic, {0.0, 0.2});
        const vec sp = exp0_ref(spherical, {0.0, 0.1});
        const vec lh = log0_ref(hyperbolic, h), ls = log0_ref(spherical, sp);
        const vec e_out = axpy(0.5, ls, axpy(0.5, lh, e));
        auto chain = [&](manifold_kind k, const vec& self, const vec& other_log) {
            const double kappa = curvature(k);
            auto a = ambient_to_stereo({k, exp0_ref(k, scaled(0.5, e))});
            auto b = ambient_to_stereo({k, self});
            auto c = ambient_to_stereo({k, exp0_ref(k, scaled(0.5, other_log))});
            return stereo_to_ambient(mobius_add(mobius_add(a, b, kappa), c, kappa), k).coords;
        };
        CHECK(max_abs_diff(row(out[euclidean], 0), e_out) <= 1e-15);
        CHECK(max_abs_diff(row(out[hyperbolic], 0), chain(hyperbolic, h, ls)) <= 1e-12);
        CHECK(max_abs_diff(row(out[spherical], 0), chain(spherical, sp, lh)) <= 1e-12);
    }
}

TEST_CASE("feature transform") {
    layer_params p;
    p.cross = tensor({1, 6}, 0.0);
    for (auto& b : p.bias) b = tensor({1, 2}, 0.0);

    SUBCASE("identity weight") {
        std::mt19937_64 rng(2);
        p.weight = tensor::from_rows({{1, 0}, {0, 1}});
        manifold_state s;
        s[manifold_kind::euclidean] = random_tensor(5, 2, rng);
        s[manifold_kind::hyperbolic] = exp0(manifold_kind::hyperbolic, random_tensor(5, 2, rng));
        s[manifold_kind::spherical] = exp0(manifold_kind::spherical, random_tensor(5, 2, rng, 0.5));
        auto out = feature_transform(s, p, manifold_set{});
        for (auto k : all_manifolds) CHECK(max_diff(out[k], s[k]) <= 1e-9);
    }
    SUBCASE("euclidean affine map") {
        p.weight = tensor::from_rows({{2, 0}, {0, 2}});
        p.bias[slot(manifold_kind::euclidean)] = tensor::from_rows({{1, 1}});
        manifold_state s;
        s[manifold_kind::euclidean] = tensor::from_rows({{1, 2}});
        auto out = feature_transform(s, p, manifold_set::parse("E"));
        CHECK(row(out[manifold_kind::euclidean], 0) == vec{3, 5});
    }
    SUBCASE("hyperbolic halving") {
        p.weight = tensor::from_rows({{0.5, 0}, {0, 0.5}});
        manifold_state s;
        s[manifold_kind::hyperbolic] = exp0(manifold_kind::hyperbolic, tensor::from_rows({{0, 0.4}}));
        auto out = feature_transform(s, p, manifold_set::parse("H"));
        CHECK(max_abs_diff(row(out[manifold_kind::hyperbolic], 0), exp0_ref(manifold_kind::hyperbolic, {0, 0.2})) <=
              1e-9);
    }
    SUBCASE("dimension mismatch") {
        p.weight = tensor({2, 3}, 0.0);
        manifold_state s;
        s[manifold_kind::euclidean] = tensor({1, 2}, 0.0);
        CHECK_THROWS_AS(feature_transform(s, p, manifold_set::parse("E")), dimension_error);
    }
}

TEST_CASE("neighbourhood aggregation") {
    SUBCASE("isolated node keeps its state") {
        auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(1, {}));
        manifold_state s;
        s[manifold_kind::hyperbolic] = exp0(manifold_kind::hyperbolic, tensor::from_rows({{0.3, -0.2}}));
        auto out = aggregate_neighbors(s, a, manifold_set::parse("H"), activation::identity);
        CHECK(max_diff(out[manifold_kind::hyperbolic], s[manifold_kind::hyperbolic]) <= 1e-15);
    }
    SUBCASE("two connected nodes with equal tangents") {
        std::vector<edge> es{{0, 1}};
        auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(2, es));
        const vec t{0.3, -0.4};
        manifold_state s;
        for (auto k : all_manifolds) s[k] = exp0(k, tensor::from_rows({t, t}));
        auto out = aggregate_neighbors(s, a, manifold_set{}, activation::relu);
        // sigma(t (0.5 + 0.5)) = relu(t)
        for (auto k : all_manifolds) {
            INFO(to_string(k));
            CHECK(max_abs_diff(log0_ref(k, row(out[k], 0)), {0.3, 0.0}) <= 1e-12);
        }
    }
    SUBCASE("zero stays zero") {
        auto g = toy_graph(2, 1);
        auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
        manifold_state s;
        for (auto k : all_manifolds) s[k] = exp0(k, tensor({6, 3}, 0.0));
        auto out = aggregate_neighbors(s, a, manifold_set{}, activation::relu);
        for (auto k : all_manifolds) CHECK(out[k].to_rows() == s[k].to_rows());
    }
}

TEST_CASE("forward against a step-by-step evaluation") {
    using enum manifold_kind;
    const std::size_t feat = 5, hidden = 4;
    auto g = toy_graph(feat, 3);
    auto x = std::make_shared<const ad::csr_matrix>(feature_matrix(g));
    auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
    model_config cfg{.input_dim = feat, .hidden_dim = hidden, .num_layers = 2, .dropout = 0.0};
    std::mt19937_64 rng(21);
    auto params = init_params(cfg, rng);
    randomize(params, rng);

    auto out = forward(x, a, params, cfg);

    // Oracle state: per node, per manifold, plain vectors through the scalar kernels.
    std::array<std::vector<vec>, 3> st;
    for (std::size_t i = 0; i < 6; ++i) {
        vec base(hidden, 0.0);
        for (std::size_t f = 0; f < feat; ++f)
            for (std::size_t j = 0; j < hidden; ++j) base[j] += g.feature_row(i)[f] * params.lift(f, j);
        for (auto k : all_manifolds) st[slot(k)].push_back(exp0_ref(k, base));
    }
    const auto nbr = normalize_adjacency(g);
    for (std::size_t l = 0; l < 2; ++l) {
        const auto& p = params.layers[l];
        auto lam = [&](cross_slot c) { return p.cross(0, c); };
        std::array<std::vector<vec>, 3> next;
        for (std::size_t i = 0; i < 6; ++i) {
            const vec e = st[0][i], h = st[1][i], s = st[2][i];
            const vec lh = log0_ref(hyperbolic, h), ls = log0_ref(spherical, s);
            next[0].push_back(axpy(lam(s_to_e), ls, axpy(lam(h_to_e), lh, e)));
            auto chain = [&](manifold_kind k, const vec& self, double le, const vec& other, double lo) {
                auto u1 = ambient_to_stereo({k, exp0_ref(k, scaled(le, e))});
                auto u2 = ambient_to_stereo({k, self});
                auto u3 = ambient_to_stereo({k, exp0_ref(k, scaled(lo, other))});
                return stereo_to_ambient(mobius_add(mobius_add(u1, u2, curvature(k)), u3, curvature(k)), k).coords;
            };
            next[1].push_back(chain(hyperbolic, h, lam(e_to_h), ls, lam(s_to_h)));
            next[2].push_back(chain(spherical, s, lam(e_to_s), lh, lam(h_to_s)));
        }
        for (auto k : all_manifolds) {
            auto& rows = next[slot(k)];
            std::vector<vec> tangent;
            for (auto& r : rows) {
                const vec t = log0_ref(k, r);
                vec u(hidden);
                for (std::size_t j = 0; j < hidden; ++j) {
                    u[j] = p.bias[slot(k)](0, j);
                    for (std::size_t q = 0; q < hidden; ++q) u[j] += p.weight(j, q) * t[q];
                }
                tangent.push_back(log0_ref(k, exp0_ref(k, u)));
            }
            for (std::size_t i = 0; i < 6; ++i) {
                vec agg(hidden, 0.0);
                for (std::size_t e = nbr.row_ptr[i]; e < nbr.row_ptr[i + 1]; ++e)
                    agg = axpy(nbr.values[e], tangent[nbr.col_idx[e]], agg);
                if (l == 0)
                    for (double& v : agg) v = std::max(v, 0.0);
                rows[i] = exp0_ref(k, agg);
            }
        }
        st = next;
    }
    for (auto k : all_manifolds) {
        INFO(to_string(k));
        for (std::size_t i = 0; i < 6; ++i) CHECK(max_abs_diff(row(out[k], i), st[slot(k)][i]) <= 1e-9);
    }
}

TEST_CASE("forward is bit-stable and stays on the manifolds") {
    auto g = make_synthetic_graph({.num_nodes = 60, .num_classes = 3, .feature_dim = 12}, 5);
    auto x = std::make_shared<const ad::csr_matrix>(feature_matrix(g));
    auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
    model_config cfg{.input_dim = 12, .hidden_dim = 8, .num_layers = 3, .dropout = 0.3};
    std::mt19937_64 rng(1);
    auto params = init_params(cfg, rng);
    randomize(params, rng, 0.6, 0.3);

    std::mt19937_64 d1(9), d2(9);
    auto r1 = forward(x, a, params, cfg, &d1);
    auto r2 = forward(x, a, params, cfg, &d2);
    for (auto k : all_manifolds) CHECK(r1[k].to_rows() == r2[k].to_rows());

    manifold_state s = lift_features(x, params.lift, cfg.manifolds);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        s = fmgnn_layer(s, params.layers[l], a, cfg.manifolds, activation::relu);
        for (auto k : all_manifolds) CHECK(max_constraint_violation(k, s[k]) <= 1e-6);
    }
}

TEST_CASE("zero coupling equals three independent single-manifold layers") {
    std::mt19937_64 rng(31);
    auto g = make_synthetic_graph({.num_nodes = 50, .num_classes = 2, .feature_dim = 10}, 7);
    auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
    model_config cfg{.input_dim = 10, .hidden_dim = 6, .num_layers = 1, .dropout = 0.0};
    auto params = init_params(cfg, rng);
    randomize(params, rng, 0.0, 0.2);

    manifold_state s;
    for (auto k : all_manifolds) s[k] = exp0(k, random_tensor(50, 6, rng, 0.8));
    auto fused = fmgnn_layer(s, params.layers[0], a, manifold_set{}, activation::relu);
    for (auto k : all_manifolds) {
        manifold_set only{k == manifold_kind::euclidean, k == manifold_kind::hyperbolic, k == manifold_kind::spherical};
        manifold_state alone;
        alone[k] = s[k];
        auto single = fmgnn_layer(alone, params.layers[0], a, only, activation::relu);
        CHECK(max_diff(fused[k], single[k]) <= 1e-9);
    }
}

TEST_CASE("all-Euclidean forward matches the reference GCN bit for bit") {
    auto g = make_synthetic_graph({.num_nodes = 80, .num_classes = 4, .feature_dim = 20}, 2);
    row_normalize_features(g);
    auto x = std::make_shared<const ad::csr_matrix>(feature_matrix(g));
    auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
    model_config cfg{.input_dim = 20, .hidden_dim = 16, .num_layers = 2, .manifolds = manifold_set::parse("E")};
    std::mt19937_64 rng(3);
    auto params = init_params(cfg, rng);
    randomize(params, rng, 0.5, 0.2);
    auto out = forward(x, a, params, cfg);
    auto ref = reference_gcn_forward(*x, *a, params);
    const auto got = out[manifold_kind::euclidean].data();
    REQUIRE(got.size() == ref.size());
    CHECK(std::equal(got.begin(), got.end(), ref.begin()));
}

TEST_CASE("two-layer forward passes grad_check on six nodes") {
    auto g = toy_graph(4, 9);
    auto x = std::make_shared<const ad::csr_matrix>(feature_matrix(g));
    auto a = std::make_shared<const ad::csr_matrix>(normalize_adjacency(g));
    model_config cfg{.input_dim = 4, .hidden_dim = 3, .num_layers = 2, .dropout = 0.0};
    std::mt19937_64 rng(5);
    auto params = init_params(cfg, rng);
    randomize(params, rng, 0.3, 0.1);
    std::array<tensor, 3> w;
    for (auto k : all_manifolds) w[slot(k)] = random_tensor(6, ambient_dim(k, 3), rng);
    auto loss = [&] {
        auto s = forward(x, a, params, cfg);
        tensor total = ad::sum(s[manifold_kind::euclidean] * w[0]);
        total = total + ad::sum(s[manifold_kind::hyperbolic] * w[1]);
        return total + ad::sum(s[manifold_kind::spherical] * w[2]);
    };
    auto report = ad::grad_check(loss, params.tensors(), 1e-6, 1e-4);
    INFO("max relative error " << report.max_relative_error);
    CHECK(report.pass);
}

TEST_CASE("ambient moebius addition") {
    std::mt19937_64 rng(21);
    for (auto k : curved) {
        INFO(to_string(k));
        const double kappa = curvature(k);
        tensor x = exp0(k, random_tensor(40, 3, rng, 0.9));
        tensor y = exp0(k, random_tensor(40, 3, rng, 0.9));
        tensor z = gyro_add(k, x, y);
        for (std::size_t i = 0; i < 40; ++i) {
            auto ref = stereo_to_ambient(
                mobius_add(ambient_to_stereo({k, row(x, i)}), ambient_to_stereo({k, row(y, i)}), kappa), k);
            CHECK(max_abs_diff(row(z, i), ref.coords) <= 1e-12);
        }
        tensor o = exp0(k, tensor({40, 3}, 0.0));
        CHECK(gyro_add(k, o, y).to_rows() == y.to_rows());
        CHECK(max_constraint_violation(k, z) <= 1e-12);

        tensor v = random_tensor(4, 3, rng, 0.6), u = random_tensor(4, 3, rng, 0.6);
        tensor w = random_tensor(4, 4, rng);
        CHECK(ad::grad_check([&] { return ad::sum(gyro_add(k, exp0(k, v), exp0(k, u)) * w); }, {v, u}).pass);
    }
    CHECK(gyro_add(manifold_kind::euclidean, tensor::from_rows({{1, 2}}), tensor::from_rows({{3, 4}})).to_rows() ==
          std::vector<vec>{{4, 6}});
}

TEST_CASE("ambient moebius addition far from the origin") {
    // Stereographic coordinates round onto the ball boundary here.
    auto far = [](double r) { return tensor::from_rows({{std::cosh(r), std::sinh(r), 0.0}}); };
    for (double r : {20.0, 40.0, 80.0}) {
        tensor z = gyro_add(manifold_kind::hyperbolic, far(r), far(-r + 1.0));
        CHECK(std::abs(log0(manifold_kind::hyperbolic, z)(0, 0) - 1.0) <= 1e-6 * std::cosh(r));
        tensor same = gyro_add(manifold_kind::hyperbolic, far(r), far(0.0));
        CHECK(max_abs_diff(row(same, 0), row(far(r), 0)) == 0.0);
    }
    // Sum landing on the sphere's stereographic pole.
    tensor x = tensor::from_rows({{0.0, 1.0, 0.0}});
    tensor z = gyro_add(manifold_kind::spherical, x, x);
    CHECK(max_abs_diff(row(z, 0), vec{-1.0, 0.0, 0.0}) <= 1e-15);
}

TEST_CASE("hyperbolic exp0 caps the radius") {
    tensor v = tensor::from_rows({{300.0, 400.0}, {3.0, 4.0}});
    tensor x = exp0(manifold_kind::hyperbolic, v);
    auto back = log0(manifold_kind::hyperbolic, x);
    CHECK(back(0, 0) == doctest::Approx(0.6 * hyperbolic_radius_limit).epsilon(1e-9));
    CHECK(back(0, 1) == doctest::Approx(0.8 * hyperbolic_radius_limit).epsilon(1e-9));
    CHECK(max_abs_diff(row(back, 1), vec{3.0, 4.0}) <= 1e-12);
    for (double c : x.data()) CHECK(std::isfinite(c));
    tensor small = tensor::from_rows({{0.3, 0.4}});
    CHECK(exp0(manifold_kind::hyperbolic, small).to_rows() ==
          std::vector<vec>{exp0_ref(manifold_kind::hyperbolic, {0.3, 0.4})});
}
