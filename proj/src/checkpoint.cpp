#include "da/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian");

namespace da {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) {
  if (std::fwrite(&v, 4, 1, f) != 1) throw IoError("checkpoint write failed");
}

std::uint32_t get_u32(std::FILE* f, const std::string& path) {
  std::uint32_t v = 0;
  if (std::fread(&v, 4, 1, f) != 1)
    throw IoError("truncated checkpoint '" + path + "'");
  return v;
}

void put_floats(std::FILE* f, const std::vector<Scalar>& values) {
  std::vector<float> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    raw[i] = static_cast<float>(values[i]);
  if (std::fwrite(raw.data(), 4, raw.size(), f) != raw.size())
    throw IoError("checkpoint write failed");
}

std::vector<Scalar> get_floats(std::FILE* f, std::size_t count,
                               const std::string& path) {
  std::vector<float> raw(count);
  if (std::fread(raw.data(), 4, count, f) != count)
    throw IoError("truncated checkpoint '" + path + "'");
  std::vector<Scalar> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(raw[i]))
      throw FormatError("non-finite parameter in '" + path + "'");
    out[i] = raw[i];
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<ConvLayer>& layers) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open '" + path + "'");
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4)
    throw IoError("checkpoint write failed");
  put_u32(f.get(), kVersion);
  put_u32(f.get(), static_cast<std::uint32_t>(header.kind));
  put_u32(f.get(), static_cast<std::uint32_t>(header.extra.size()));
  for (std::uint32_t v : header.extra) put_u32(f.get(), v);
  put_u32(f.get(), static_cast<std::uint32_t>(layers.size()));
  for (const ConvLayer& l : layers) {
    put_u32(f.get(), static_cast<std::uint32_t>(l.in_c));
    put_u32(f.get(), static_cast<std::uint32_t>(l.out_c));
    put_u32(f.get(), static_cast<std::uint32_t>(l.ksize));
    put_u32(f.get(), static_cast<std::uint32_t>(l.stride));
  }
  for (const ConvLayer& l : layers) {
    put_floats(f.get(), l.weight.value());
    put_floats(f.get(), l.bias.value());
  }
}

CheckpointHeader load_checkpoint(const std::string& path,
                                 std::vector<ConvLayer>* layers) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open '" + path + "'");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 ||
      std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a checkpoint file: '" + path + "'");
  const std::uint32_t version = get_u32(f.get(), path);
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in '" + path + "'");
  CheckpointHeader header;
  header.kind = static_cast<CheckpointKind>(get_u32(f.get(), path));
  const std::uint32_t extra_count = get_u32(f.get(), path);
  if (extra_count > 64)
    throw FormatError("suspicious header in '" + path + "'");
  for (std::uint32_t i = 0; i < extra_count; ++i)
    header.extra.push_back(get_u32(f.get(), path));

  const std::uint32_t layer_count = get_u32(f.get(), path);
  if (layer_count > 256)
    throw FormatError("suspicious layer count in '" + path + "'");
  layers->clear();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    ConvLayer l;
    l.in_c = static_cast<int>(get_u32(f.get(), path));
    l.out_c = static_cast<int>(get_u32(f.get(), path));
    l.ksize = static_cast<int>(get_u32(f.get(), path));
    l.stride = static_cast<int>(get_u32(f.get(), path));
    if (l.in_c < 1 || l.out_c < 1 || l.ksize < 1 || l.ksize % 2 == 0 ||
        l.stride < 1)
      throw FormatError("bad layer geometry in '" + path + "'");
    layers->push_back(std::move(l));
  }
  for (ConvLayer& l : *layers) {
    const std::size_t wn =
        static_cast<std::size_t>(l.out_c) * l.in_c * l.ksize * l.ksize;
    l.weight = Tensor::param(Shape::conv_weight(l.out_c, l.in_c, l.ksize),
                             get_floats(f.get(), wn, path));
    l.bias = Tensor::param(Shape::chw(l.out_c, 1, 1),
                           get_floats(f.get(), l.out_c, path));
  }
  return header;
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
  std::vector<ConvLayer> layers;
  return load_checkpoint(path, &layers).kind;
}

}  // namespace da
