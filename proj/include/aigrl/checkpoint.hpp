#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aigrl/error.hpp"
#include "aigrl/tensor.hpp"

namespace aigrl {

// Checkpoint file layout: 8-byte magic, u64 little-endian manifest length,
// JSON manifest, then the raw little-endian scalar payload. Tensors are
// addressed by name; Adam moments ride along as "adam.m.*" / "adam.v.*".
inline constexpr char kCkptMagic[8] = {'A', 'I', 'G', 'R', 'L', 'C', 'K', '1'};

template <class S>
const char* dtype_name() {
  if constexpr (sizeof(S) == 4)
    return "f32";
  else
    return "f64";
}

template <class S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const AdamState<S>* adam, const nlohmann::json& extra) {
  nlohmann::json manifest;
  manifest["v"] = 1;
  manifest["dtype"] = dtype_name<S>();
  auto tensors = nlohmann::json::array();
  uint64_t offset = 0;
  std::vector<std::pair<const S*, size_t>> blobs;
  auto add_blob = [&](const std::string& name, const std::vector<int64_t>& shape,
                      const std::vector<S>& data) {
    nlohmann::json t;
    t["name"] = name;
    t["shape"] = shape;
    t["offset"] = offset;
    t["count"] = data.size();
    tensors.push_back(t);
    blobs.push_back({data.data(), data.size()});
    offset += data.size() * sizeof(S);
  };
  for (size_t i = 0; i < params.values.size(); ++i)
    add_blob(params.names[i], params.values[i].shape, params.values[i].data);
  if (adam) {
    nlohmann::json aj;
    aj["lr"] = adam->lr;
    aj["beta1"] = adam->beta1;
    aj["beta2"] = adam->beta2;
    aj["eps"] = adam->eps;
    aj["step"] = adam->step;
    manifest["adam"] = aj;
    for (size_t i = 0; i < params.values.size(); ++i) {
      add_blob("adam.m." + params.names[i], params.values[i].shape, adam->m[i]);
      add_blob("adam.v." + params.names[i], params.values[i].shape, adam->v[i]);
    }
  }
  manifest["tensors"] = tensors;
  manifest["extra"] = extra;
  const std::string body = manifest.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open " + tmp + " for writing");
    out.write(kCkptMagic, 8);
    const uint64_t len = body.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    for (const auto& [ptr, count] : blobs)
      out.write(reinterpret_cast<const char*>(ptr),
                static_cast<std::streamsize>(count * sizeof(S)));
    if (!out) throw ArgumentError("checkpoint write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ArgumentError("cannot move checkpoint into place at " + path);
}

template <class S>
struct LoadedCheckpoint {
  nlohmann::json manifest;
  std::vector<std::string> names;
  std::vector<Tensor<S>> tensors;

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

template <class S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kCkptMagic, 8))
    throw SchemaError("bad checkpoint magic in " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string body(len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated checkpoint manifest in " + path);
  LoadedCheckpoint<S> ck;
  ck.manifest = nlohmann::json::parse(body);
  if (ck.manifest.value("v", 0) != 1) throw SchemaError("unsupported checkpoint version");
  if (ck.manifest.value("dtype", std::string()) != dtype_name<S>())
    throw SchemaError("checkpoint dtype " + ck.manifest.value("dtype", std::string()) +
                      " does not match requested " + dtype_name<S>());
  const std::streampos data_start = in.tellg();
  for (const auto& t : ck.manifest.at("tensors")) {
    Tensor<S> tensor;
    tensor.shape = t.at("shape").template get<std::vector<int64_t>>();
    const size_t count = t.at("count").template get<size_t>();
    tensor.data.resize(count);
    in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").template get<uint64_t>()));
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(count * sizeof(S)));
    if (!in) throw SchemaError("truncated checkpoint payload in " + path);
    ck.names.push_back(t.at("name").template get<std::string>());
    ck.tensors.push_back(std::move(tensor));
  }
  return ck;
}

// Copies checkpoint tensors into an existing store; names and shapes must
// match exactly. Returns the Adam state when the checkpoint carries one.
template <class S>
bool restore_params(const LoadedCheckpoint<S>& ck, ParamStore<S>& params, AdamState<S>* adam) {
  for (size_t i = 0; i < params.values.size(); ++i) {
    const int at = ck.find(params.names[i]);
    if (at < 0) throw SchemaError("checkpoint is missing tensor " + params.names[i]);
    if (ck.tensors[at].shape != params.values[i].shape)
      throw SchemaError("checkpoint shape mismatch for " + params.names[i]);
    params.values[i].data = ck.tensors[at].data;
  }
  if (!ck.manifest.contains("adam")) return false;
  if (adam) {
    const auto& aj = ck.manifest.at("adam");
    adam->lr = aj.at("lr").template get<double>();
    adam->beta1 = aj.at("beta1").template get<double>();
    adam->beta2 = aj.at("beta2").template get<double>();
    adam->eps = aj.at("eps").template get<double>();
    adam->step = aj.at("step").template get<int64_t>();
    adam->m.clear();
    adam->v.clear();
    for (size_t i = 0; i < params.values.size(); ++i) {
      const int mi = ck.find("adam.m." + params.names[i]);
      const int vi = ck.find("adam.v." + params.names[i]);
      if (mi < 0 || vi < 0) throw SchemaError("checkpoint is missing Adam moments");
      adam->m.push_back(ck.tensors[mi].data);
      adam->v.push_back(ck.tensors[vi].data);
    }
  }
  return true;
}

}  // namespace aigrl
