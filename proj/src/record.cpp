#include "defaff/record.hpp"

#include <fstream>

#include <json.hpp>

#include "defaff/serialize.hpp"

namespace defaff::data {

namespace {
constexpr const char* kMagic = "DAFDATA1";
constexpr std::uint32_t kVersion = 1;

void write_blob(ByteWriter& w, const std::vector<std::uint8_t>& b) {
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.bytes(b);
}

std::vector<std::uint8_t> read_blob(ByteReader& r) {
    const std::uint32_t n = r.u32();
    std::vector<std::uint8_t> out(n);
    for (std::uint32_t i = 0; i < n; ++i) out[i] = r.u8();
    return out;
}

void write_record(ByteWriter& w, const InteractionRecord& rec) {
    write_blob(w, percept::serialize_observation(rec.obs_before));
    write_blob(w, rec.sim_state_before);
    w.i32(rec.pick.row);
    w.i32(rec.pick.col);
    w.i32(rec.place.row);
    w.i32(rec.place.col);
    write_blob(w, percept::serialize_observation(rec.obs_after));
    w.f64(rec.dist_after);
    w.i32(rec.stage);
    w.u8(static_cast<std::uint8_t>(rec.outcome));
}

InteractionRecord read_record(ByteReader& r) {
    InteractionRecord rec;
    rec.obs_before = percept::deserialize_observation(read_blob(r));
    rec.sim_state_before = read_blob(r);
    rec.pick.row = r.i32();
    rec.pick.col = r.i32();
    rec.place.row = r.i32();
    rec.place.col = r.i32();
    rec.obs_after = percept::deserialize_observation(read_blob(r));
    rec.dist_after = r.f64();
    rec.stage = r.i32();
    rec.outcome = static_cast<Outcome>(r.u8());
    return rec;
}

}  // namespace

std::uint64_t collection_fingerprint(const CollectionConfig& cfg, const std::string& task_name,
                                     int grid_rows, int grid_cols, std::uint64_t seed) {
    std::string canon = task_name + "|" + std::to_string(cfg.records_per_stage) + "|" +
                        std::to_string(cfg.similarity_tau) + "|" +
                        std::to_string(cfg.actions_per_state) + "|" +
                        std::to_string(cfg.perturb_radius) + "|" +
                        std::to_string(cfg.random_failure_fraction) + "|" +
                        std::to_string(cfg.num_stages) + "|" + std::to_string(grid_rows) + "x" +
                        std::to_string(grid_cols) + "|" + std::to_string(seed);
    return fnv1a64(canon);
}

std::vector<std::uint8_t> dataset_bytes(const StageDataset& ds) {
    ByteWriter w;
    w.str(kMagic);
    w.u32(kVersion);
    w.i32(ds.stage);
    w.u64(ds.seed);
    w.u64(ds.config_fingerprint);
    w.u32(static_cast<std::uint32_t>(ds.records.size()));
    for (const InteractionRecord& rec : ds.records) write_record(w, rec);
    std::vector<std::uint8_t> bytes = w.take();
    const std::uint64_t sum = fnv1a64(bytes);
    ByteWriter tail;
    tail.u64(sum);
    bytes.insert(bytes.end(), tail.data().begin(), tail.data().end());
    return bytes;
}

StageDataset dataset_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) throw std::runtime_error("dataset: truncated file");
    std::vector<std::uint8_t> payload(bytes.begin(), bytes.end() - 8);
    {
        std::vector<std::uint8_t> tail_bytes(bytes.end() - 8, bytes.end());
        ByteReader tr(tail_bytes);
        if (tr.u64() != fnv1a64(payload)) throw std::runtime_error("dataset: checksum failure");
    }
    ByteReader r(payload);
    if (r.str() != kMagic) throw std::runtime_error("dataset: bad magic");
    if (r.u32() != kVersion) throw std::runtime_error("dataset: version mismatch");
    StageDataset ds;
    ds.stage = r.i32();
    ds.seed = r.u64();
    ds.config_fingerprint = r.u64();
    const std::uint32_t n = r.u32();
    ds.records.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ds.records.push_back(read_record(r));
    return ds;
}

void save_dataset(const std::string& path, const StageDataset& ds) {
    write_file_bytes(path, dataset_bytes(ds));
}

StageDataset load_dataset(const std::string& path) {
    return dataset_from_bytes(read_file_bytes(path));
}

void export_dataset_jsonl(const std::string& path, const StageDataset& ds) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const InteractionRecord& rec : ds.records) {
        nlohmann::json j;
        j["stage"] = rec.stage;
        j["pick"] = {rec.pick.row, rec.pick.col};
        j["place"] = {rec.place.row, rec.place.col};
        j["dist_after"] = rec.dist_after;
        j["outcome"] = rec.outcome == Outcome::Normal ? "normal" : "nograsp";
        j["coverage_before"] = percept::coverage(rec.obs_before);
        j["coverage_after"] = percept::coverage(rec.obs_after);
        j["state_b64"] = base64_encode(rec.sim_state_before);
        j["obs_before_b64"] = base64_encode(percept::serialize_observation(rec.obs_before));
        j["obs_after_b64"] = base64_encode(percept::serialize_observation(rec.obs_after));
        out << j.dump() << "\n";
    }
}

}  // namespace defaff::data
