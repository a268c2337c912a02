#include "placekit/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace placekit {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

constexpr char kMagic[4] = {'P', 'K', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_blob(std::ofstream& f, const std::vector<float>& blob) {
  write_u64(f, blob.size());
  f.write(reinterpret_cast<const char*>(blob.data()),
          std::streamsize(blob.size() * sizeof(float)));
}

std::vector<float> read_blob(std::ifstream& f) {
  std::uint64_t n = read_u64(f);
  std::vector<float> blob(n);
  f.read(reinterpret_cast<char*>(blob.data()),
         std::streamsize(n * sizeof(float)));
  if (!f) throw CorruptCheckpoint("truncated blob");
  return blob;
}

std::uint64_t blobs_hash(const CheckpointData& ck) {
  std::uint64_t h = fnv1a64(ck.params.data(), ck.params.size() * sizeof(float));
  h = fnv1a64(ck.m.data(), ck.m.size() * sizeof(float), h);
  h = fnv1a64(ck.v.data(), ck.v.size() * sizeof(float), h);
  return h;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointData& ck) {
  json manifest = json::array();
  for (const auto& e : ck.manifest)
    manifest.push_back(
        {{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(blobs_hash(ck)));
  json header{{"step", ck.step},
              {"rng_state", ck.rng_state},
              {"config", json::parse(ck.config_json.empty() ? "{}"
                                                            : ck.config_json)},
              {"manifest", manifest},
              {"blob_hash", hash_hex}};
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(kMagic, 4);
  f.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  write_u64(f, hs.size());
  f.write(hs.data(), std::streamsize(hs.size()));
  write_blob(f, ck.params);
  write_blob(f, ck.m);
  write_blob(f, ck.v);
  if (!f) throw Error("short write to " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptCheckpoint("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!f || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion)
    throw CorruptCheckpoint("bad checkpoint header in " + path.string());
  std::uint64_t hlen = read_u64(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), std::streamsize(hlen));
  if (!f) throw CorruptCheckpoint("truncated checkpoint header");
  json header = json::parse(hs, nullptr, false);
  if (header.is_discarded())
    throw CorruptCheckpoint("invalid checkpoint header JSON");

  CheckpointData ck;
  ck.step = header.at("step").get<std::int64_t>();
  ck.rng_state = header.at("rng_state").get<std::uint64_t>();
  ck.config_json = header.at("config").dump();
  for (const auto& e : header.at("manifest")) {
    ParamManifestEntry pe;
    pe.name = e.at("name").get<std::string>();
    pe.shape = e.at("shape").get<std::vector<int>>();
    pe.offset = e.at("offset").get<std::size_t>();
    ck.manifest.push_back(std::move(pe));
  }
  ck.params = read_blob(f);
  ck.m = read_blob(f);
  ck.v = read_blob(f);

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(blobs_hash(ck)));
  if (header.at("blob_hash").get<std::string>() != hash_hex)
    throw CorruptCheckpoint("checkpoint blob hash mismatch");
  return ck;
}

CheckpointData pack_params(const nn::ParamRefs<float>& params) {
  CheckpointData ck;
  std::size_t off = 0;
  for (const auto* p : params) {
    ck.manifest.push_back({p->name, p->value.shape, off});
    off += p->value.numel();
  }
  ck.params.reserve(off);
  for (const auto* p : params)
    ck.params.insert(ck.params.end(), p->value.data.begin(),
                     p->value.data.end());
  return ck;
}

void unpack_params(const CheckpointData& ck, nn::ParamRefs<float>& params) {
  if (ck.manifest.size() != params.size())
    throw CorruptCheckpoint("parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& e = ck.manifest[i];
    if (e.name != p.name || e.shape != p.value.shape)
      throw CorruptCheckpoint("parameter layout mismatch at " + e.name);
    if (e.offset + p.value.numel() > ck.params.size())
      throw CorruptCheckpoint("parameter blob too short");
    std::copy_n(ck.params.begin() + std::ptrdiff_t(e.offset), p.value.numel(),
                p.value.data.begin());
  }
}

}  // namespace placekit
