#include "sixdiff/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "sixdiff/errors.hpp"

namespace sixdiff {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'I', 'X', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("truncated checkpoint");
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const DenoiserModel& model) {
  const auto& c = model.config();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  for (int v : {c.d_embed, c.d_ff, c.n_layers, c.n_heads_global, c.n_heads_local, c.seq_len, c.vocab}) {
    put<std::int32_t>(out, v);
  }
  put<double>(out, c.dropout);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.window_schedule.size()));
  for (int w : c.window_schedule) put<std::int32_t>(out, w);

  const auto tensors = model.params().tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value->cols()));
    out.write(reinterpret_cast<const char*>(t.value->data()),
              static_cast<std::streamsize>(t.value->size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed");
}

DenoiserModel read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  ModelConfig c;
  c.d_embed = get<std::int32_t>(in);
  c.d_ff = get<std::int32_t>(in);
  c.n_layers = get<std::int32_t>(in);
  c.n_heads_global = get<std::int32_t>(in);
  c.n_heads_local = get<std::int32_t>(in);
  c.seq_len = get<std::int32_t>(in);
  c.vocab = get<std::int32_t>(in);
  c.dropout = get<double>(in);
  const auto windows = get<std::uint32_t>(in);
  if (windows > 4096) throw CheckpointError("implausible window count");
  c.window_schedule.resize(windows);
  for (auto& w : c.window_schedule) w = get<std::int32_t>(in);
  try {
    c.validate();
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid stored config: ") + e.what());
  }

  DenoiserParameters params = DenoiserParameters::zeros(c);
  auto tensors = params.tensors();
  const auto count = get<std::uint32_t>(in);
  if (count != tensors.size()) {
    throw CheckpointError("expected " + std::to_string(tensors.size()) + " tensors, found " + std::to_string(count));
  }
  for (auto& t : tensors) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 1024) throw CheckpointError("implausible tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CheckpointError("truncated checkpoint");
    if (name != t.name) throw CheckpointError("expected tensor '" + t.name + "', found '" + name + "'");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(t.value->rows()) || cols != static_cast<std::uint64_t>(t.value->cols())) {
      throw CheckpointError("tensor '" + name + "' has the wrong shape");
    }
    if (!in.read(reinterpret_cast<char*>(t.value->data()),
                 static_cast<std::streamsize>(t.value->size() * sizeof(double)))) {
      throw CheckpointError("truncated tensor '" + name + "'");
    }
  }
  return DenoiserModel(std::move(c), std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
  write_checkpoint(out, model);
}

DenoiserModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace sixdiff
