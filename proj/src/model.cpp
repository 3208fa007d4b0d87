#include "defaff/model.hpp"

#include <stdexcept>

#include "defaff/serialize.hpp"

namespace defaff::nn {

namespace {

constexpr const char* kMagic = "DAFCKPT1";
constexpr std::uint32_t kVersion = 1;

std::vector<std::string> param_names(const AffordanceNet& net) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < net.backbone.enc.size(); ++i) {
        names.push_back("enc" + std::to_string(i) + ".w");
        names.push_back("enc" + std::to_string(i) + ".b");
    }
    for (std::size_t i = 0; i < net.backbone.dec.size(); ++i) {
        names.push_back("dec" + std::to_string(i) + ".w");
        names.push_back("dec" + std::to_string(i) + ".b");
    }
    names.push_back("hidden.w");
    names.push_back("hidden.b");
    names.push_back("output.w");
    names.push_back("output.b");
    return names;
}

void write_net(ByteWriter& w, const AffordanceNet& net, const std::string& role) {
    w.str(role);
    const auto params = net_params(net);
    const auto names = param_names(net);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        w.str(names[i]);
        w.u32(static_cast<std::uint32_t>(params[i]->shape.size()));
        for (int d : params[i]->shape) w.i32(d);
    }
    for (const Tensor* p : params)
        for (double v : p->v) w.f32(static_cast<float>(v));
}

void read_net(ByteReader& r, AffordanceNet& net, const std::string& role) {
    if (r.str() != role) throw std::runtime_error("checkpoint: unexpected net role");
    auto params = net_params(net);
    const auto names = param_names(net);
    if (r.u32() != params.size()) throw std::runtime_error("checkpoint: layer manifest mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (r.str() != names[i]) throw std::runtime_error("checkpoint: layer name mismatch");
        const std::uint32_t nd = r.u32();
        if (nd != params[i]->shape.size())
            throw std::runtime_error("checkpoint: rank mismatch for " + names[i]);
        for (std::uint32_t d = 0; d < nd; ++d)
            if (r.i32() != params[i]->shape[d])
                throw std::runtime_error("checkpoint: shape mismatch for " + names[i]);
    }
    for (Tensor* p : params)
        for (double& v : p->v) v = static_cast<double>(r.f32());
}

}  // namespace

ModelPair make_models(int in_channels, double width_factor, std::uint64_t seed) {
    ModelPair m;
    m.pick = AffordanceNet::make(HeadKind::Pick, in_channels, width_factor,
                                 derive_seed(seed, {0x7069636bULL}));
    m.place = AffordanceNet::make(HeadKind::Place, in_channels, width_factor,
                                  derive_seed(seed, {0x706c6163ULL}));
    m.stage = 0;
    m.lineage = "init";
    return m;
}

std::vector<std::uint8_t> checkpoint_bytes(const ModelPair& models) {
    ByteWriter w;
    w.str(kMagic);
    w.u32(kVersion);
    w.f64(models.pick.backbone.width_factor);
    w.i32(models.pick.backbone.in_channels);
    w.i32(models.stage);
    w.str(models.lineage);
    write_net(w, models.pick, "pick");
    write_net(w, models.place, "place");
    std::vector<std::uint8_t> bytes = w.take();
    const std::uint64_t sum = fnv1a64(bytes);
    ByteWriter tail;
    tail.u64(sum);
    bytes.insert(bytes.end(), tail.data().begin(), tail.data().end());
    return bytes;
}

ModelPair models_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) throw std::runtime_error("checkpoint: truncated");
    std::vector<std::uint8_t> payload(bytes.begin(), bytes.end() - 8);
    {
        ByteReader tail(bytes);
        std::vector<std::uint8_t> tail_bytes(bytes.end() - 8, bytes.end());
        ByteReader tr(tail_bytes);
        if (tr.u64() != fnv1a64(payload)) throw std::runtime_error("checkpoint: checksum failure");
    }
    ByteReader r(payload);
    if (r.str() != kMagic) throw std::runtime_error("checkpoint: bad magic");
    if (r.u32() != kVersion) throw std::runtime_error("checkpoint: version mismatch");
    const double width = r.f64();
    const int in_ch = r.i32();
    ModelPair m = make_models(in_ch, width, 0);
    m.stage = r.i32();
    m.lineage = r.str();
    read_net(r, m.pick, "pick");
    read_net(r, m.place, "place");
    return m;
}

void save_checkpoint(const std::string& path, const ModelPair& models) {
    write_file_bytes(path, checkpoint_bytes(models));
}

ModelPair load_checkpoint(const std::string& path) {
    return models_from_bytes(read_file_bytes(path));
}

std::uint64_t models_fingerprint(const ModelPair& models) {
    return fnv1a64(checkpoint_bytes(models));
}

}  // namespace defaff::nn
