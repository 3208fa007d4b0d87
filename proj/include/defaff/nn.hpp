#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defaff/rng.hpp"
#include "defaff/tensor.hpp"

namespace defaff::nn {

// ---------------------------------------------------------------------------
// Layers. Feature maps are CHW; forward/backward are explicit per layer.
// Parallel loops only ever write disjoint elements, so results are identical
// for any thread count.
// ---------------------------------------------------------------------------

struct Conv2d {
    int in_ch = 0;
    int out_ch = 0;
    int stride = 1;   // 1 or 2; 3x3 kernel, padding 1
    Tensor w;         // [out_ch, in_ch, 3, 3]
    Tensor b;         // [out_ch]

    static Conv2d make(int in_ch, int out_ch, int stride, Rng& rng);
};

void conv_forward(const Conv2d& c, const Tensor& x, Tensor& y);
void conv_backward(const Conv2d& c, const Tensor& x, const Tensor& dy, Tensor& dx, Tensor& gw,
                   Tensor& gb);

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

void upsample2x_forward(const Tensor& x, Tensor& y);
void upsample2x_backward(const Tensor& dy, Tensor& dx);

void concat_forward(const Tensor& a, const Tensor& b, Tensor& y);
void concat_backward(const Tensor& dy, Tensor& da, Tensor& db);

void global_avg_pool_forward(const Tensor& x, Tensor& y);
void global_avg_pool_backward(const Tensor& dy, Tensor& dx);

struct Linear {
    int in = 0;
    int out = 0;
    Tensor w;  // [out, in]
    Tensor b;  // [out]

    static Linear make(int in, int out, Rng& rng);
};

void linear_forward(const Linear& l, const std::vector<double>& x, std::vector<double>& y);
void linear_backward(const Linear& l, const std::vector<double>& x, const std::vector<double>& dy,
                     std::vector<double>& dx, Tensor& gw, Tensor& gb);

// Mean absolute error; the subgradient at zero residual is 0.
double mae_loss(const std::vector<double>& pred, const std::vector<double>& target);
std::vector<double> mae_grad(const std::vector<double>& pred, const std::vector<double>& target);

// ---------------------------------------------------------------------------
// Encoder-decoder backbone: four 2x strided downsamples to a bottleneck
// (where the global feature is pooled), then mirrored nearest-neighbor
// upsampling with skip concatenations. Channel schedule is the base sequence
// 64,64,128,256,512,512 / 512,256,256,128,128,256,256,256 scaled by
// width_factor.
// ---------------------------------------------------------------------------

struct FcnBackbone {
    double width_factor = 1.0;
    int in_channels = 2;
    std::vector<Conv2d> enc;  // 6 conv layers
    std::vector<Conv2d> dec;  // 8 conv layers

    int feature_width() const;  // F: channels of the per-point feature grid
    int global_width() const;   // G: channels of the pooled bottleneck

    static FcnBackbone make(int in_channels, double width_factor, Rng& rng);
};

int scaled_channels(int base, double width_factor);

// Activations recorded by one forward pass, consumed by backward.
struct FcnTape {
    Tensor x;
    std::vector<Tensor> e;    // post-ReLU encoder outputs
    std::vector<Tensor> up;   // upsampled decoder inputs
    std::vector<Tensor> cat;  // concatenated skip inputs
    std::vector<Tensor> d;    // post-ReLU decoder outputs
    Tensor global_feature;    // [G]

    const Tensor& point_features() const { return d.back(); }
};

void fcn_forward(const FcnBackbone& net, const Tensor& x, FcnTape& tape);

// d_features/d_global may be sparse (mostly zero); gradients are accumulated
// into `grads`, which must mirror fcn_params() order.
void fcn_backward(const FcnBackbone& net, const FcnTape& tape, const Tensor& d_features,
                  const std::vector<double>& d_global, std::vector<Tensor>& grads);

std::vector<Tensor*> fcn_params(FcnBackbone& net);
std::vector<const Tensor*> fcn_params(const FcnBackbone& net);

// ---------------------------------------------------------------------------
// Affordance networks: backbone + 2-layer MLP head. The pick head scores a
// cell from its feature; the place head scores a cell from the concatenation
// pick feature | place feature | global feature.
// ---------------------------------------------------------------------------

enum class HeadKind { Pick, Place };

struct AffordanceNet {
    HeadKind kind = HeadKind::Pick;
    FcnBackbone backbone;
    Linear hidden;
    Linear output;

    static AffordanceNet make(HeadKind kind, int in_channels, double width_factor,
                              std::uint64_t seed);

    int head_input_width() const;
};

std::vector<Tensor*> net_params(AffordanceNet& net);
std::vector<const Tensor*> net_params(const AffordanceNet& net);

std::vector<Tensor> zero_grads_like(const AffordanceNet& net);

// Head forward on an assembled input vector; returns the scalar score.
double head_forward(const AffordanceNet& net, const std::vector<double>& input);

struct HeadTape {
    std::vector<double> input;
    std::vector<double> hidden_pre;  // hidden layer output after ReLU
};

double head_forward(const AffordanceNet& net, const std::vector<double>& input, HeadTape& tape);

// d_score -> gradient w.r.t. the head input vector; head param grads go into
// grads[n-2], grads[n-1] (hidden, output) following net_params order.
std::vector<double> head_backward(const AffordanceNet& net, const HeadTape& tape, double d_score,
                                  std::vector<Tensor>& grads);

std::vector<double> feature_at(const Tensor& features, int row, int col);

std::uint64_t params_fingerprint(const AffordanceNet& net);

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState make(const std::vector<const Tensor*>& params, double lr);
    static AdamState make(const std::vector<Tensor*>& params, double lr);
};

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace defaff::nn
