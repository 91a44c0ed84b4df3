#include "pwg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "pwg/common.hpp"

namespace pwg {

namespace {

constexpr char kMagic[8] = {'P', 'W', 'G', 'C', 'K', 'P', 'T', '1'};

std::string u64_hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hex_u64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["step"] = ckpt.step;
  manifest["config"] = ckpt.config;
  manifest["counters"] = ckpt.counters;
  {
    nlohmann::json rngs = nlohmann::json::object();
    for (const auto& [name, st] : ckpt.rng_states) {
      rngs[name] = {u64_hex(st[0]), u64_hex(st[1]), u64_hex(st[2]), u64_hex(st[3])};
    }
    manifest["rng"] = std::move(rngs);
  }

  // Stats travel in the payload like any other tensor.
  std::vector<const CheckpointTensor*> payload_order;
  CheckpointTensor stats_mean{"stats/mean", {ckpt.stats.mean.size()}, ckpt.stats.mean};
  CheckpointTensor stats_std{"stats/stddev", {ckpt.stats.stddev.size()}, ckpt.stats.stddev};

  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add_entry = [&](const CheckpointTensor& t) {
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    e["numel"] = t.data.size();
    tensors.push_back(std::move(e));
    payload_order.push_back(&t);
    offset += t.data.size();
  };
  for (const auto& t : ckpt.tensors) add_entry(t);
  if (!ckpt.stats.mean.empty()) {
    add_entry(stats_mean);
    add_entry(stats_std);
  }
  manifest["tensors"] = std::move(tensors);

  const std::string header = manifest.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("checkpoint: cannot write " + path);
  f.write(kMagic, 8);
  const std::uint64_t hlen = header.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto* t : payload_order) {
    f.write(reinterpret_cast<const char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  }
  if (!f) throw DataError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  if (!f) throw DataError("checkpoint: truncated header in " + path);
  std::string header(hlen, '\0');
  f.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw DataError("checkpoint: truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: malformed manifest in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.step = manifest.at("step").get<std::uint64_t>();
  ckpt.config = manifest.at("config").get<std::map<std::string, std::string>>();
  if (manifest.contains("counters"))
    ckpt.counters = manifest.at("counters").get<std::map<std::string, std::uint64_t>>();
  for (const auto& [name, arr] : manifest.at("rng").items()) {
    std::array<std::uint64_t, 4> st{};
    for (std::size_t i = 0; i < 4; ++i) st[i] = hex_u64(arr.at(i).get<std::string>());
    ckpt.rng_states[name] = st;
  }

  for (const auto& e : manifest.at("tensors")) {
    CheckpointTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto numel = e.at("numel").get<std::uint64_t>();
    t.data.resize(numel);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(numel * sizeof(double)));
    if (!f) throw DataError("checkpoint: truncated payload in " + path);
    ckpt.tensors.push_back(std::move(t));
  }

  // Pull stats back out of the tensor list.
  auto take = [&](const char* name, std::vector<double>& dst) {
    for (auto it = ckpt.tensors.begin(); it != ckpt.tensors.end(); ++it) {
      if (it->name == name) {
        dst = std::move(it->data);
        ckpt.tensors.erase(it);
        return;
      }
    }
  };
  take("stats/mean", ckpt.stats.mean);
  take("stats/stddev", ckpt.stats.stddev);
  return ckpt;
}

}  // namespace pwg
