#include "mhls/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace mhls {

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'H', 'L', 'S'};
constexpr std::uint32_t kMaxString = 1u << 16;
constexpr std::uint64_t kMaxElements = 1ull << 32;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 8);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void get_bytes(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(FormatError::Kind::truncated, "file ends before the data it declares");
  }
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b;
  get_bytes(in, reinterpret_cast<char*>(b.data()), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b;
  get_bytes(in, reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string get_string(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > kMaxString) throw FormatError(FormatError::Kind::truncated, "string length out of range");
  std::string s(n, '\0');
  get_bytes(in, s.data(), n);
  return s;
}

void put_arrays(std::ostream& out, const std::vector<NamedArray>& arrays) {
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    put_string(out, a.name);
    const Shape& shape = a.value.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.rank()));
    for (std::size_t d : shape.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : a.value.data()) put_f64(out, v);
  }
}

std::vector<NamedArray> get_arrays(std::istream& in) {
  const std::uint32_t count = get_u32(in);
  std::vector<NamedArray> arrays;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = get_string(in);
    const std::uint32_t rank = get_u32(in);
    if (rank < 1 || rank > Shape::kMaxRank) {
      throw FormatError(FormatError::Kind::shape, "array " + a.name + " has invalid rank");
    }
    std::array<std::size_t, Shape::kMaxRank> dims{};
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      dims[r] = get_u32(in);
      if (dims[r] == 0) {
        throw FormatError(FormatError::Kind::shape, "array " + a.name + " has a zero dimension");
      }
      elements *= dims[r];
      if (elements > kMaxElements) {
        throw FormatError(FormatError::Kind::shape, "array " + a.name + " is implausibly large");
      }
    }
    std::vector<double> data(static_cast<std::size_t>(elements));
    for (double& v : data) v = get_f64(in);
    a.value = Tensor(Shape(std::span<const std::size_t>(dims.data(), rank)), std::move(data));
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const Tensor* find_in(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return &a.value;
  }
  return nullptr;
}

Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

}  // namespace

const Tensor* Archive::find_array(const std::string& name) const { return find_in(arrays, name); }
const Tensor* Archive::find_extra(const std::string& name) const { return find_in(extras, name); }

const Tensor& Archive::extra(const std::string& name) const {
  const Tensor* t = find_extra(name);
  if (!t) throw FormatError(FormatError::Kind::missing, "missing field " + name);
  return *t;
}

void write_archive(std::ostream& out, const Archive& archive) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, archive.version);
  put_string(out, archive.tag);
  put_arrays(out, archive.arrays);
  put_arrays(out, archive.extras);
  if (!out) throw FormatError(FormatError::Kind::io, "write failed");
}

Archive read_archive(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "not a model or dataset file (bad magic)");
  }
  Archive archive;
  archive.version = get_u32(in);
  if (archive.version != kFormatVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      "unsupported format version " + std::to_string(archive.version));
  }
  archive.tag = get_string(in);
  archive.arrays = get_arrays(in);
  archive.extras = get_arrays(in);
  return archive;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + path.string() + " for writing");
  write_archive(out, archive);
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  return read_archive(in);
}

Archive to_archive(const Checkpoint& ckpt) {
  Archive archive;
  archive.tag = std::string(variant_tag(ckpt.model.kind()));
  ckpt.model.for_each([&archive](const std::string& name, const Tensor& t, ParamRole) {
    archive.arrays.push_back({name, t});
  });
  const SizeConfig& s = ckpt.model.size();
  archive.extras.push_back(
      {"meta.size", Tensor(Shape{7}, {double(s.input), double(s.hidden), double(s.aux_hidden),
                                      double(s.n_z), double(s.fc), s.layer_norm ? 1.0 : 0.0,
                                      double(ckpt.model.classes())})});
  archive.extras.push_back({"meta.epoch", scalar(double(ckpt.meta.epoch))});
  archive.extras.push_back({"meta.val_loss", scalar(ckpt.meta.val_loss)});
  archive.extras.push_back({"meta.threshold", scalar(ckpt.meta.threshold)});
  archive.extras.push_back({"meta.t_w", scalar(double(ckpt.meta.t_w))});
  if (ckpt.scaler) {
    archive.extras.push_back({"scaler.min", Tensor(Shape{kFeatures}, ckpt.scaler->min())});
    archive.extras.push_back({"scaler.max", Tensor(Shape{kFeatures}, ckpt.scaler->max())});
  }
  return archive;
}

Checkpoint from_archive(const Archive& archive, std::optional<CellKind> expected) {
  CellKind kind;
  try {
    kind = parse_variant(archive.tag);
  } catch (const std::invalid_argument&) {
    throw FormatError(FormatError::Kind::bad_variant, "unknown model variant '" + archive.tag + "'");
  }
  if (expected && *expected != kind) {
    throw FormatError(FormatError::Kind::bad_variant,
                      "checkpoint holds a " + archive.tag + " model, expected " +
                          std::string(variant_tag(*expected)));
  }
  const Tensor& sz = archive.extra("meta.size");
  if (sz.size() != 7) throw FormatError(FormatError::Kind::shape, "meta.size must have 7 entries");
  SizeConfig size;
  size.input = static_cast<std::size_t>(sz[0]);
  size.hidden = static_cast<std::size_t>(sz[1]);
  size.aux_hidden = static_cast<std::size_t>(sz[2]);
  size.n_z = static_cast<std::size_t>(sz[3]);
  size.fc = static_cast<std::size_t>(sz[4]);
  size.layer_norm = sz[5] != 0.0;

  Checkpoint ckpt{SequenceModel::zeros(kind, size, static_cast<std::size_t>(sz[6])), {}, {}};
  std::size_t bound = 0;
  ckpt.model.for_each([&](const std::string& name, Tensor& t, ParamRole) {
    const Tensor* stored = archive.find_array(name);
    if (!stored) throw FormatError(FormatError::Kind::missing, "missing parameter " + name);
    if (!(stored->shape() == t.shape())) {
      throw FormatError(FormatError::Kind::shape, "parameter " + name + " has shape " +
                                                      stored->shape().str() + ", expected " +
                                                      t.shape().str());
    }
    t = *stored;
    ++bound;
  });
  if (bound != archive.arrays.size()) {
    throw FormatError(FormatError::Kind::shape, "checkpoint holds parameters the model lacks");
  }
  ckpt.meta.epoch = static_cast<std::size_t>(archive.extra("meta.epoch")[0]);
  ckpt.meta.val_loss = archive.extra("meta.val_loss")[0];
  ckpt.meta.threshold = archive.extra("meta.threshold")[0];
  ckpt.meta.t_w = static_cast<std::size_t>(archive.extra("meta.t_w")[0]);
  const Tensor* lo = archive.find_extra("scaler.min");
  const Tensor* hi = archive.find_extra("scaler.max");
  if (lo && hi) {
    ckpt.scaler = FeatureScaler(std::vector<double>(lo->data().begin(), lo->data().end()),
                                std::vector<double>(hi->data().begin(), hi->data().end()));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  save_archive(path, to_archive(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<CellKind> expected) {
  return from_archive(load_archive(path), expected);
}

}  // namespace mhls
