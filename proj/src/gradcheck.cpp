#include "defaff/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "defaff/nn.hpp"

namespace defaff::nn {

namespace {

constexpr double kEps = 1e-4;

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// Compares the analytic gradient of `loss()` w.r.t. every element of `x`
// against central differences. `analytic` is the precomputed gradient.
double check_tensor(Tensor& x, const Tensor& analytic, const std::function<double()>& loss,
                    int& compared, bool corrupt) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double saved = x.v[i];
        x.v[i] = saved + kEps;
        const double hi = loss();
        x.v[i] = saved - kEps;
        const double lo = loss();
        x.v[i] = saved;
        const double numeric = (hi - lo) / (2.0 * kEps);
        double a = analytic.v[i];
        if (corrupt && i == 0) a += 0.01 * (1.0 + std::fabs(a));
        worst = std::max(worst, rel_err(a, numeric));
        ++compared;
    }
    return worst;
}

// Same, but only at `samples` seeded positions; used for the large
// end-to-end pipelines.
double check_tensor_sampled(Tensor& x, const Tensor& analytic,
                            const std::function<double()>& loss, int samples, Rng& rng,
                            int& compared, bool corrupt) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const std::size_t i = rng.bounded(x.v.size());
        const double saved = x.v[i];
        x.v[i] = saved + kEps;
        const double hi = loss();
        x.v[i] = saved - kEps;
        const double lo = loss();
        x.v[i] = saved;
        const double numeric = (hi - lo) / (2.0 * kEps);
        double a = analytic.v[i];
        if (corrupt && s == 0) a += 0.01 * (1.0 + std::fabs(a));
        worst = std::max(worst, rel_err(a, numeric));
        ++compared;
    }
    return worst;
}

LayerCheckResult check_conv(int stride, std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Conv2d conv = Conv2d::make(2, 3, stride, rng);
    for (double& v : conv.b.v) v = rng.uniform(-0.2, 0.2);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor proj = random_tensor({3, 6 / stride, 6 / stride}, rng);

    auto loss = [&]() {
        Tensor y;
        conv_forward(conv, x, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * proj.v[i];
        return acc;
    };

    Tensor y;
    conv_forward(conv, x, y);
    Tensor dx, gw = Tensor::zeros(conv.w.shape), gb = Tensor::zeros(conv.b.shape);
    conv_backward(conv, x, proj, dx, gw, gb);

    LayerCheckResult r{stride == 1 ? "conv3x3_s1" : "conv3x3_s2", 0.0, 0};
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(x, dx, loss, r.compared, corrupt));
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(conv.w, gw, loss, r.compared, false));
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(conv.b, gb, loss, r.compared, false));
    return r;
}

LayerCheckResult check_relu(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Tensor x = Tensor::zeros({3, 4, 4});
    for (double& v : x.v) {
        v = rng.uniform(-1.0, 1.0);
        if (std::fabs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;  // keep away from the kink
    }
    Tensor proj = random_tensor(x.shape, rng);

    auto loss = [&]() {
        Tensor y;
        relu_forward(x, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * proj.v[i];
        return acc;
    };

    Tensor y;
    relu_forward(x, y);
    Tensor dx;
    relu_backward(y, proj, dx);

    LayerCheckResult r{"relu", 0.0, 0};
    r.max_rel_err = check_tensor(x, dx, loss, r.compared, corrupt);
    return r;
}

LayerCheckResult check_upsample(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Tensor x = random_tensor({2, 3, 3}, rng);
    Tensor proj = random_tensor({2, 6, 6}, rng);
    auto loss = [&]() {
        Tensor y;
        upsample2x_forward(x, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * proj.v[i];
        return acc;
    };
    Tensor dx;
    upsample2x_backward(proj, dx);
    LayerCheckResult r{"upsample2x", 0.0, 0};
    r.max_rel_err = check_tensor(x, dx, loss, r.compared, corrupt);
    return r;
}

LayerCheckResult check_concat(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Tensor a = random_tensor({2, 3, 3}, rng);
    Tensor b = random_tensor({3, 3, 3}, rng);
    Tensor proj = random_tensor({5, 3, 3}, rng);
    auto loss = [&]() {
        Tensor y;
        concat_forward(a, b, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * proj.v[i];
        return acc;
    };
    Tensor da, db;
    da.shape = a.shape;
    db.shape = b.shape;
    concat_backward(proj, da, db);
    LayerCheckResult r{"concat", 0.0, 0};
    r.max_rel_err = std::max(check_tensor(a, da, loss, r.compared, corrupt),
                             check_tensor(b, db, loss, r.compared, false));
    return r;
}

LayerCheckResult check_gap(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Tensor x = random_tensor({3, 4, 4}, rng);
    Tensor proj = random_tensor({3}, rng);
    auto loss = [&]() {
        Tensor y;
        global_avg_pool_forward(x, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * proj.v[i];
        return acc;
    };
    Tensor dx;
    dx.shape = x.shape;
    dx.v.resize(x.v.size());
    global_avg_pool_backward(proj, dx);
    LayerCheckResult r{"global_avg_pool", 0.0, 0};
    r.max_rel_err = check_tensor(x, dx, loss, r.compared, corrupt);
    return r;
}

LayerCheckResult check_linear(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Linear lin = Linear::make(6, 4, rng);
    for (double& v : lin.b.v) v = rng.uniform(-0.2, 0.2);
    Tensor x = random_tensor({6}, rng);
    Tensor proj = random_tensor({4}, rng);

    auto loss = [&]() {
        std::vector<double> y;
        linear_forward(lin, x.v, y);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * proj.v[i];
        return acc;
    };

    std::vector<double> dxv;
    Tensor gw = Tensor::zeros(lin.w.shape), gb = Tensor::zeros(lin.b.shape);
    linear_backward(lin, x.v, proj.v, dxv, gw, gb);
    Tensor dx;
    dx.shape = x.shape;
    dx.v = dxv;

    LayerCheckResult r{"linear", 0.0, 0};
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(x, dx, loss, r.compared, corrupt));
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(lin.w, gw, loss, r.compared, false));
    r.max_rel_err = std::max(r.max_rel_err, check_tensor(lin.b, gb, loss, r.compared, false));
    return r;
}

LayerCheckResult check_mae(std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    Tensor pred = random_tensor({8}, rng);
    std::vector<double> target(8);
    for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] = rng.uniform(-1.0, 1.0);
        if (std::fabs(pred.v[i] - target[i]) < 0.01)
            target[i] += (pred.v[i] > target[i]) ? -0.02 : 0.02;  // residual off the kink
    }
    auto loss = [&]() { return mae_loss(pred.v, target); };
    Tensor g;
    g.shape = pred.shape;
    g.v = mae_grad(pred.v, target);
    LayerCheckResult r{"mae", 0.0, 0};
    r.max_rel_err = check_tensor(pred, g, loss, r.compared, corrupt);
    return r;
}

// End-to-end: tiny backbone + head on a 16x16 two-channel input; the loss is
// the MAE of one scored cell against a target kept away from zero residual.
LayerCheckResult check_pipeline(HeadKind kind, std::uint64_t seed, bool corrupt) {
    Rng rng(seed);
    AffordanceNet net = AffordanceNet::make(kind, 2, 1.0 / 16.0, rng.next_u64());
    Tensor x = random_tensor({2, 16, 16}, rng, 0.0, 1.0);

    const int pick_r = 5, pick_c = 7, place_r = 11, place_c = 3;

    auto score = [&]() {
        FcnTape tape;
        fcn_forward(net.backbone, x, tape);
        std::vector<double> input;
        if (kind == HeadKind::Pick) {
            input = feature_at(tape.point_features(), pick_r, pick_c);
        } else {
            const std::vector<double> pf = feature_at(tape.point_features(), pick_r, pick_c);
            const std::vector<double> lf = feature_at(tape.point_features(), place_r, place_c);
            input = pf;
            input.insert(input.end(), lf.begin(), lf.end());
            input.insert(input.end(), tape.global_feature.v.begin(), tape.global_feature.v.end());
        }
        return head_forward(net, input);
    };

    const double target = score() - 0.5;  // residual 0.5, far from the MAE kink
    auto loss = [&]() { return std::fabs(score() - target); };

    // Analytic gradients.
    std::vector<Tensor> grads = zero_grads_like(net);
    FcnTape tape;
    fcn_forward(net.backbone, x, tape);
    HeadTape head_tape;
    std::vector<double> input;
    const int F = net.backbone.feature_width();
    if (kind == HeadKind::Pick) {
        input = feature_at(tape.point_features(), pick_r, pick_c);
    } else {
        const std::vector<double> pf = feature_at(tape.point_features(), pick_r, pick_c);
        const std::vector<double> lf = feature_at(tape.point_features(), place_r, place_c);
        input = pf;
        input.insert(input.end(), lf.begin(), lf.end());
        input.insert(input.end(), tape.global_feature.v.begin(), tape.global_feature.v.end());
    }
    const double pred = head_forward(net, input, head_tape);
    const double d_score = pred - target > 0.0 ? 1.0 : -1.0;
    const std::vector<double> d_input = head_backward(net, head_tape, d_score, grads);

    Tensor d_feat = Tensor::zeros(tape.point_features().shape);
    std::vector<double> d_global(net.backbone.global_width(), 0.0);
    const int H = d_feat.dim(1), W = d_feat.dim(2);
    for (int c = 0; c < F; ++c)
        d_feat.v[(static_cast<std::size_t>(c) * H + pick_r) * W + pick_c] += d_input[c];
    if (kind == HeadKind::Place) {
        for (int c = 0; c < F; ++c)
            d_feat.v[(static_cast<std::size_t>(c) * H + place_r) * W + place_c] +=
                d_input[F + c];
        for (int g = 0; g < net.backbone.global_width(); ++g) d_global[g] = d_input[2 * F + g];
    }
    fcn_backward(net.backbone, tape, d_feat, d_global, grads);

    LayerCheckResult r{kind == HeadKind::Pick ? "pick_pipeline" : "place_pipeline", 0.0, 0};
    auto params = net_params(net);
    Rng pos_rng(derive_seed(seed, {0x73616d70ULL}));
    for (std::size_t t = 0; t < params.size(); ++t) {
        const int samples = std::min<std::size_t>(4, params[t]->v.size());
        r.max_rel_err = std::max(
            r.max_rel_err, check_tensor_sampled(*params[t], grads[t], loss, samples, pos_rng,
                                                r.compared, corrupt && t == 0));
    }
    return r;
}

}  // namespace

std::vector<LayerCheckResult> run_gradient_checks(std::uint64_t seed, int corrupt_layer) {
    std::vector<LayerCheckResult> out;
    int k = 0;
    auto is_corrupt = [&](int idx) { return corrupt_layer == idx; };
    out.push_back(check_conv(1, derive_seed(seed, {1}), is_corrupt(k++)));
    out.push_back(check_conv(2, derive_seed(seed, {2}), is_corrupt(k++)));
    out.push_back(check_relu(derive_seed(seed, {3}), is_corrupt(k++)));
    out.push_back(check_upsample(derive_seed(seed, {4}), is_corrupt(k++)));
    out.push_back(check_concat(derive_seed(seed, {5}), is_corrupt(k++)));
    out.push_back(check_gap(derive_seed(seed, {6}), is_corrupt(k++)));
    out.push_back(check_linear(derive_seed(seed, {7}), is_corrupt(k++)));
    out.push_back(check_mae(derive_seed(seed, {8}), is_corrupt(k++)));
    out.push_back(check_pipeline(HeadKind::Pick, derive_seed(seed, {9}), is_corrupt(k++)));
    out.push_back(check_pipeline(HeadKind::Place, derive_seed(seed, {10}), is_corrupt(k++)));
    return out;
}

bool gradient_checks_pass(const std::vector<LayerCheckResult>& results, double tol) {
    for (const LayerCheckResult& r : results)
        if (!(r.max_rel_err < tol)) return false;
    return true;
}

}  // namespace defaff::nn
