#include "defaff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "defaff/serialize.hpp"

namespace defaff::nn {

namespace {

void he_fill(Tensor& t, int fan_in, Rng& rng) {
    const double s = std::sqrt(2.0 / fan_in);
    for (double& x : t.v) x = s * rng.normal();
}

void check_shape(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("shape error: ") + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d Conv2d::make(int in_ch, int out_ch, int stride, Rng& rng) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.stride = stride;
    c.w = Tensor::zeros({out_ch, in_ch, 3, 3});
    c.b = Tensor::zeros({out_ch});
    he_fill(c.w, in_ch * 9, rng);
    return c;
}

void conv_forward(const Conv2d& c, const Tensor& x, Tensor& y) {
    check_shape(x.shape.size() == 3 && x.dim(0) == c.in_ch, "conv input");
    const int H = x.dim(1), W = x.dim(2), s = c.stride;
    check_shape(s == 1 || (H % 2 == 0 && W % 2 == 0), "strided conv needs even dims");
    const int Ho = H / s, Wo = W / s;
    y = Tensor::zeros({c.out_ch, Ho, Wo});

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < c.out_ch; ++oc) {
        double* ybase = y.data() + static_cast<std::size_t>(oc) * Ho * Wo;
        const double bias = c.b.v[oc];
        for (int i = 0; i < Ho * Wo; ++i) ybase[i] = bias;
        for (int ic = 0; ic < c.in_ch; ++ic) {
            const double* xbase = x.data() + static_cast<std::size_t>(ic) * H * W;
            const double* wbase =
                c.w.data() + (static_cast<std::size_t>(oc) * c.in_ch + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = wbase[ky * 3 + kx];
                    // ox range keeping ix = s*ox + kx - 1 inside [0, W)
                    int lo = 0, hi = Wo;
                    while (lo < Wo && s * lo + kx - 1 < 0) ++lo;
                    while (hi > lo && s * (hi - 1) + kx - 1 >= W) --hi;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = s * oy + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xbase + static_cast<std::size_t>(iy) * W + (kx - 1);
                        double* yrow = ybase + static_cast<std::size_t>(oy) * Wo;
                        if (s == 1) {
                            for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[ox];
                        } else {
                            for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[2 * ox];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const Conv2d& c, const Tensor& x, const Tensor& dy, Tensor& dx, Tensor& gw,
                   Tensor& gb) {
    const int H = x.dim(1), W = x.dim(2), s = c.stride;
    const int Ho = dy.dim(1), Wo = dy.dim(2);
    dx = Tensor::zeros({c.in_ch, H, W});

    // dx: each thread owns a full input channel, so writes stay disjoint.
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < c.in_ch; ++ic) {
        double* dxbase = dx.data() + static_cast<std::size_t>(ic) * H * W;
        for (int oc = 0; oc < c.out_ch; ++oc) {
            const double* dybase = dy.data() + static_cast<std::size_t>(oc) * Ho * Wo;
            const double* wbase =
                c.w.data() + (static_cast<std::size_t>(oc) * c.in_ch + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = wbase[ky * 3 + kx];
                    int lo = 0, hi = Wo;
                    while (lo < Wo && s * lo + kx - 1 < 0) ++lo;
                    while (hi > lo && s * (hi - 1) + kx - 1 >= W) --hi;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = s * oy + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        double* dxrow = dxbase + static_cast<std::size_t>(iy) * W + (kx - 1);
                        const double* dyrow = dybase + static_cast<std::size_t>(oy) * Wo;
                        if (s == 1) {
                            for (int ox = lo; ox < hi; ++ox) dxrow[ox] += wv * dyrow[ox];
                        } else {
                            for (int ox = lo; ox < hi; ++ox) dxrow[2 * ox] += wv * dyrow[ox];
                        }
                    }
                }
            }
        }
    }

    // gw/gb: each thread owns one output channel's weights.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < c.out_ch; ++oc) {
        const double* dybase = dy.data() + static_cast<std::size_t>(oc) * Ho * Wo;
        double acc_b = 0.0;
        for (int i = 0; i < Ho * Wo; ++i) acc_b += dybase[i];
        gb.v[oc] += acc_b;
        for (int ic = 0; ic < c.in_ch; ++ic) {
            const double* xbase = x.data() + static_cast<std::size_t>(ic) * H * W;
            double* gwbase = gw.data() + (static_cast<std::size_t>(oc) * c.in_ch + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    int lo = 0, hi = Wo;
                    while (lo < Wo && s * lo + kx - 1 < 0) ++lo;
                    while (hi > lo && s * (hi - 1) + kx - 1 >= W) --hi;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = s * oy + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xbase + static_cast<std::size_t>(iy) * W + (kx - 1);
                        const double* dyrow = dybase + static_cast<std::size_t>(oy) * Wo;
                        if (s == 1) {
                            for (int ox = lo; ox < hi; ++ox) acc += dyrow[ox] * xrow[ox];
                        } else {
                            for (int ox = lo; ox < hi; ++ox) acc += dyrow[ox] * xrow[2 * ox];
                        }
                    }
                    gwbase[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pointwise / structural layers
// ---------------------------------------------------------------------------

void relu_forward(const Tensor& x, Tensor& y) {
    y.shape = x.shape;
    y.v.resize(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
}

void relu_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
    dx.shape = dy.shape;
    dx.v.resize(dy.v.size());
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = y.v[i] > 0.0 ? dy.v[i] : 0.0;
}

void upsample2x_forward(const Tensor& x, Tensor& y) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    y = Tensor::zeros({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c) {
        const double* xb = x.data() + static_cast<std::size_t>(c) * H * W;
        double* yb = y.data() + static_cast<std::size_t>(c) * 4 * H * W;
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const double v = xb[i * W + j];
                double* out = yb + (2 * i) * (2 * W) + 2 * j;
                out[0] = v;
                out[1] = v;
                out[2 * W] = v;
                out[2 * W + 1] = v;
            }
        }
    }
}

void upsample2x_backward(const Tensor& dy, Tensor& dx) {
    const int C = dy.dim(0), H2 = dy.dim(1), W2 = dy.dim(2);
    const int H = H2 / 2, W = W2 / 2;
    dx = Tensor::zeros({C, H, W});
    for (int c = 0; c < C; ++c) {
        const double* dyb = dy.data() + static_cast<std::size_t>(c) * H2 * W2;
        double* dxb = dx.data() + static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const double* in = dyb + (2 * i) * W2 + 2 * j;
                dxb[i * W + j] = in[0] + in[1] + in[W2] + in[W2 + 1];
            }
        }
    }
}

void concat_forward(const Tensor& a, const Tensor& b, Tensor& y) {
    check_shape(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2), "concat spatial dims");
    y = Tensor::zeros({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
}

void concat_backward(const Tensor& dy, Tensor& da, Tensor& db) {
    // da/db must carry their target shapes on entry.
    da.v.assign(dy.v.begin(), dy.v.begin() + static_cast<std::ptrdiff_t>(da.count()));
    db.v.assign(dy.v.begin() + static_cast<std::ptrdiff_t>(da.count()), dy.v.end());
}

void global_avg_pool_forward(const Tensor& x, Tensor& y) {
    const int C = x.dim(0), HW = x.dim(1) * x.dim(2);
    y = Tensor::zeros({C});
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        const double* xb = x.data() + static_cast<std::size_t>(c) * HW;
        for (int i = 0; i < HW; ++i) acc += xb[i];
        y.v[c] = acc / HW;
    }
}

void global_avg_pool_backward(const Tensor& dy, Tensor& dx) {
    // dx must carry the spatial shape on entry.
    const int C = dx.dim(0), HW = dx.dim(1) * dx.dim(2);
    for (int c = 0; c < C; ++c) {
        const double g = dy.v[c] / HW;
        double* db = dx.data() + static_cast<std::size_t>(c) * HW;
        for (int i = 0; i < HW; ++i) db[i] = g;
    }
}

// ---------------------------------------------------------------------------
// Linear + MAE
// ---------------------------------------------------------------------------

Linear Linear::make(int in, int out, Rng& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = Tensor::zeros({out, in});
    l.b = Tensor::zeros({out});
    he_fill(l.w, in, rng);
    return l;
}

void linear_forward(const Linear& l, const std::vector<double>& x, std::vector<double>& y) {
    check_shape(static_cast<int>(x.size()) == l.in, "linear input");
    y.assign(l.out, 0.0);
    for (int o = 0; o < l.out; ++o) {
        const double* wrow = l.w.data() + static_cast<std::size_t>(o) * l.in;
        double acc = l.b.v[o];
        for (int i = 0; i < l.in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
}

void linear_backward(const Linear& l, const std::vector<double>& x, const std::vector<double>& dy,
                     std::vector<double>& dx, Tensor& gw, Tensor& gb) {
    dx.assign(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
        const double g = dy[o];
        gb.v[o] += g;
        const double* wrow = l.w.data() + static_cast<std::size_t>(o) * l.in;
        double* gwrow = gw.data() + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) {
            gwrow[i] += g * x[i];
            dx[i] += g * wrow[i];
        }
    }
}

double mae_loss(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mae_loss: length mismatch");
    if (pred.empty()) throw std::invalid_argument("mae_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
    return acc / pred.size();
}

std::vector<double> mae_grad(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mae_grad: length mismatch");
    std::vector<double> g(pred.size(), 0.0);
    const double inv = 1.0 / pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        g[i] = r > 0.0 ? inv : (r < 0.0 ? -inv : 0.0);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Backbone
// ---------------------------------------------------------------------------

int scaled_channels(int base, double width_factor) {
    return std::max(1, static_cast<int>(std::lround(base * width_factor)));
}

int FcnBackbone::feature_width() const { return scaled_channels(256, width_factor); }
int FcnBackbone::global_width() const { return scaled_channels(512, width_factor); }

FcnBackbone FcnBackbone::make(int in_channels, double width_factor, Rng& rng) {
    FcnBackbone net;
    net.width_factor = width_factor;
    net.in_channels = in_channels;
    auto ch = [width_factor](int base) { return scaled_channels(base, width_factor); };

    net.enc.push_back(Conv2d::make(in_channels, ch(64), 1, rng));
    net.enc.push_back(Conv2d::make(ch(64), ch(64), 1, rng));
    net.enc.push_back(Conv2d::make(ch(64), ch(128), 2, rng));
    net.enc.push_back(Conv2d::make(ch(128), ch(256), 2, rng));
    net.enc.push_back(Conv2d::make(ch(256), ch(512), 2, rng));
    net.enc.push_back(Conv2d::make(ch(512), ch(512), 2, rng));

    net.dec.push_back(Conv2d::make(ch(512) + ch(512), ch(512), 1, rng));
    net.dec.push_back(Conv2d::make(ch(512), ch(256), 1, rng));
    net.dec.push_back(Conv2d::make(ch(256) + ch(256), ch(256), 1, rng));
    net.dec.push_back(Conv2d::make(ch(256), ch(128), 1, rng));
    net.dec.push_back(Conv2d::make(ch(128) + ch(128), ch(128), 1, rng));
    net.dec.push_back(Conv2d::make(ch(128), ch(256), 1, rng));
    net.dec.push_back(Conv2d::make(ch(256) + ch(64), ch(256), 1, rng));
    net.dec.push_back(Conv2d::make(ch(256), ch(256), 1, rng));
    return net;
}

void fcn_forward(const FcnBackbone& net, const Tensor& x, FcnTape& tape) {
    check_shape(x.dim(1) % 16 == 0 && x.dim(2) % 16 == 0, "input dims must divide by 16");
    tape.x = x;
    tape.e.assign(6, {});
    tape.up.assign(4, {});
    tape.cat.assign(4, {});
    tape.d.assign(8, {});

    Tensor pre;
    const Tensor* cur = &x;
    for (int i = 0; i < 6; ++i) {
        conv_forward(net.enc[i], *cur, pre);
        relu_forward(pre, tape.e[i]);
        cur = &tape.e[i];
    }
    global_avg_pool_forward(tape.e[5], tape.global_feature);

    // Decoder junctions pair mirrored resolutions: e[4] at H/8, e[3] at H/4,
    // e[2] at H/2, e[1] at H.
    const Tensor* skips[4] = {&tape.e[4], &tape.e[3], &tape.e[2], &tape.e[1]};
    cur = &tape.e[5];
    for (int j = 0; j < 4; ++j) {
        upsample2x_forward(*cur, tape.up[j]);
        concat_forward(tape.up[j], *skips[j], tape.cat[j]);
        conv_forward(net.dec[2 * j], tape.cat[j], pre);
        relu_forward(pre, tape.d[2 * j]);
        conv_forward(net.dec[2 * j + 1], tape.d[2 * j], pre);
        relu_forward(pre, tape.d[2 * j + 1]);
        cur = &tape.d[2 * j + 1];
    }
}

std::vector<Tensor*> fcn_params(FcnBackbone& net) {
    std::vector<Tensor*> out;
    for (Conv2d& c : net.enc) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    for (Conv2d& c : net.dec) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    return out;
}

std::vector<const Tensor*> fcn_params(const FcnBackbone& net) {
    std::vector<const Tensor*> out;
    for (const Conv2d& c : net.enc) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    for (const Conv2d& c : net.dec) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    return out;
}

void fcn_backward(const FcnBackbone& net, const FcnTape& tape, const Tensor& d_features,
                  const std::vector<double>& d_global, std::vector<Tensor>& grads) {
    // grads: [enc0.w, enc0.b, ..., enc5.b, dec0.w, ..., dec7.b, ...]
    auto gw = [&grads](int conv_idx) -> Tensor& { return grads[2 * conv_idx]; };
    auto gb = [&grads](int conv_idx) -> Tensor& { return grads[2 * conv_idx + 1]; };
    const int dec_off = 6;

    Tensor d_cur, d_pre, d_prev;
    std::vector<Tensor> d_skip(4);

    d_cur = d_features;
    for (int j = 3; j >= 0; --j) {
        relu_backward(tape.d[2 * j + 1], d_cur, d_pre);
        conv_backward(net.dec[2 * j + 1], tape.d[2 * j], d_pre, d_prev,
                      gw(dec_off + 2 * j + 1), gb(dec_off + 2 * j + 1));
        relu_backward(tape.d[2 * j], d_prev, d_pre);
        Tensor d_cat;
        conv_backward(net.dec[2 * j], tape.cat[j], d_pre, d_cat, gw(dec_off + 2 * j),
                      gb(dec_off + 2 * j));
        Tensor d_up;
        d_up.shape = tape.up[j].shape;
        d_skip[j].shape = (j == 0)   ? tape.e[4].shape
                          : (j == 1) ? tape.e[3].shape
                          : (j == 2) ? tape.e[2].shape
                                     : tape.e[1].shape;
        concat_backward(d_cat, d_up, d_skip[j]);
        upsample2x_backward(d_up, d_cur);
    }

    // Bottleneck also feeds the pooled global feature.
    {
        Tensor d_gap;
        d_gap.shape = tape.e[5].shape;
        d_gap.v.resize(tape.e[5].v.size());
        Tensor dg;
        dg.shape = {static_cast<int>(d_global.size())};
        dg.v = d_global;
        global_avg_pool_backward(dg, d_gap);
        for (std::size_t i = 0; i < d_cur.v.size(); ++i) d_cur.v[i] += d_gap.v[i];
    }

    for (int i = 5; i >= 0; --i) {
        relu_backward(tape.e[i], d_cur, d_pre);
        const Tensor& input = (i == 0) ? tape.x : tape.e[i - 1];
        conv_backward(net.enc[i], input, d_pre, d_cur, gw(i), gb(i));
        // Skip connections re-enter at e[4], e[3], e[2], e[1].
        if (i >= 2 && i <= 5) {
            const Tensor& s = d_skip[5 - i];
            for (std::size_t k = 0; k < d_cur.v.size(); ++k) d_cur.v[k] += s.v[k];
        }
    }
}

// ---------------------------------------------------------------------------
// Affordance nets
// ---------------------------------------------------------------------------

int AffordanceNet::head_input_width() const {
    const int f = backbone.feature_width();
    return kind == HeadKind::Pick ? f : 2 * f + backbone.global_width();
}

AffordanceNet AffordanceNet::make(HeadKind kind, int in_channels, double width_factor,
                                  std::uint64_t seed) {
    Rng rng(seed);
    AffordanceNet net;
    net.kind = kind;
    net.backbone = FcnBackbone::make(in_channels, width_factor, rng);
    const int f = net.backbone.feature_width();
    net.hidden = Linear::make(net.head_input_width(), f, rng);
    net.output = Linear::make(f, 1, rng);
    return net;
}

std::vector<Tensor*> net_params(AffordanceNet& net) {
    std::vector<Tensor*> out = fcn_params(net.backbone);
    out.push_back(&net.hidden.w);
    out.push_back(&net.hidden.b);
    out.push_back(&net.output.w);
    out.push_back(&net.output.b);
    return out;
}

std::vector<const Tensor*> net_params(const AffordanceNet& net) {
    std::vector<const Tensor*> out = fcn_params(net.backbone);
    out.push_back(&net.hidden.w);
    out.push_back(&net.hidden.b);
    out.push_back(&net.output.w);
    out.push_back(&net.output.b);
    return out;
}

std::vector<Tensor> zero_grads_like(const AffordanceNet& net) {
    std::vector<Tensor> g;
    for (const Tensor* p : net_params(net)) g.push_back(Tensor::zeros(p->shape));
    return g;
}

double head_forward(const AffordanceNet& net, const std::vector<double>& input) {
    HeadTape tape;
    return head_forward(net, input, tape);
}

double head_forward(const AffordanceNet& net, const std::vector<double>& input, HeadTape& tape) {
    tape.input = input;
    std::vector<double> pre;
    linear_forward(net.hidden, input, pre);
    for (double& v : pre) v = v > 0.0 ? v : 0.0;
    tape.hidden_pre = pre;
    std::vector<double> out;
    linear_forward(net.output, pre, out);
    return out[0];
}

std::vector<double> head_backward(const AffordanceNet& net, const HeadTape& tape, double d_score,
                                  std::vector<Tensor>& grads) {
    const std::size_t n = grads.size();
    Tensor& g_hw = grads[n - 4];
    Tensor& g_hb = grads[n - 3];
    Tensor& g_ow = grads[n - 2];
    Tensor& g_ob = grads[n - 1];

    std::vector<double> d_hidden;
    linear_backward(net.output, tape.hidden_pre, {d_score}, d_hidden, g_ow, g_ob);
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
        if (tape.hidden_pre[i] <= 0.0) d_hidden[i] = 0.0;
    std::vector<double> d_input;
    linear_backward(net.hidden, tape.input, d_hidden, d_input, g_hw, g_hb);
    return d_input;
}

std::vector<double> feature_at(const Tensor& features, int row, int col) {
    const int C = features.dim(0), H = features.dim(1), W = features.dim(2);
    std::vector<double> f(C);
    for (int c = 0; c < C; ++c)
        f[c] = features.v[(static_cast<std::size_t>(c) * H + row) * W + col];
    return f;
}

std::uint64_t params_fingerprint(const AffordanceNet& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor* p : net_params(net)) {
        h = fnv1a64(reinterpret_cast<const std::uint8_t*>(p->v.data()),
                    p->v.size() * sizeof(double), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState AdamState::make(const std::vector<const Tensor*>& params, double lr) {
    AdamState s;
    s.lr = lr;
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

AdamState AdamState::make(const std::vector<Tensor*>& params, double lr) {
    std::vector<const Tensor*> cparams(params.begin(), params.end());
    return make(cparams, lr);
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const Tensor& g = grads[t];
        if (p.v.size() != g.v.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        Tensor& m = state.m[t];
        Tensor& v = state.v[t];
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = state.beta1 * m.v[i] + (1.0 - state.beta1) * g.v[i];
            v.v[i] = state.beta2 * v.v[i] + (1.0 - state.beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace defaff::nn
