#include "sgcn/trainer/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sgcn::trainer {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw CheckpointError("corrupt checkpoint: truncated");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::size_t element_size(DType t) {
  switch (t) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
  }
  throw CheckpointError("corrupt checkpoint: unknown dtype");
}

std::string param_key(const std::string& name) { return "param/" + name; }
std::string buffer_key(const std::string& name, const char* which) {
  return "bn/" + name + "/" + which;
}

template <typename Real>
numcore::Tensor<Real> vector_tensor(const std::vector<Real>& v) {
  return numcore::Tensor<Real>({v.size()}, v);
}

}  // namespace

template <typename Real>
Section Section::from_tensor(std::string name, const numcore::Tensor<Real>& t) {
  static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
  Section s;
  s.name = std::move(name);
  s.dtype = std::is_same_v<Real, float> ? DType::f32 : DType::f64;
  s.dims.assign(t.shape().begin(), t.shape().end());
  s.payload.resize(t.size() * sizeof(Real));
  std::memcpy(s.payload.data(), t.data(), s.payload.size());
  return s;
}

Section Section::from_text(std::string name, const std::string& text) {
  Section s;
  s.name = std::move(name);
  s.dtype = DType::u8;
  s.dims = {text.size()};
  s.payload.assign(text.begin(), text.end());
  return s;
}

template <typename Real>
numcore::Tensor<Real> Section::to_tensor() const {
  numcore::Shape shape(dims.begin(), dims.end());
  const std::size_t n = numcore::shape_size(shape);
  std::vector<Real> values(n);
  if (dtype == DType::f32) {
    std::vector<float> raw(n);
    std::memcpy(raw.data(), payload.data(), n * sizeof(float));
    std::copy(raw.begin(), raw.end(), values.begin());
  } else if (dtype == DType::f64) {
    std::vector<double> raw(n);
    std::memcpy(raw.data(), payload.data(), n * sizeof(double));
    std::copy(raw.begin(), raw.end(), values.begin());
  } else {
    throw CheckpointError("section '" + name + "' is not numeric");
  }
  return numcore::Tensor<Real>(std::move(shape), std::move(values));
}

std::string Section::to_text() const {
  if (dtype != DType::u8) throw CheckpointError("section '" + name + "' is not text");
  return std::string(payload.begin(), payload.end());
}

const Section* CheckpointFile::find(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Section& CheckpointFile::at(const std::string& name) const {
  if (const Section* s = find(name)) return *s;
  throw CheckpointError("checkpoint has no section '" + name + "'");
}

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode(const CheckpointFile& file) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint64_t>(file.config_json.size());
  w.bytes(file.config_json.data(), file.config_json.size());
  for (const Section& s : file.sections) {
    std::uint64_t count = 1;
    for (auto d : s.dims) count *= d;
    if (count * element_size(s.dtype) != s.payload.size()) {
      throw std::invalid_argument("checkpoint section '" + s.name + "': payload does not match dims");
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.dtype));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) w.put<std::uint64_t>(d);
    w.bytes(s.payload.data(), s.payload.size());
  }
  w.put<std::uint32_t>(crc32_of(w.out));
  return std::move(w.out);
}

CheckpointFile decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint");
  }
  Reader r(bytes.data(), bytes.size());
  r.take(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
  }
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 4) throw CheckpointError("corrupt checkpoint: truncated");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::vector<std::uint8_t> body(bytes.begin(), bytes.end() - 4);
  if (crc32_of(body) != stored) throw CheckpointError("corrupt checkpoint: CRC mismatch");

  Reader b(body.data(), body.size());
  b.take(sizeof(kMagic) + 4);
  CheckpointFile file;
  const auto config_len = b.get<std::uint64_t>();
  const auto* config = b.take(config_len);
  file.config_json.assign(config, config + config_len);
  while (b.remaining() > 0) {
    Section s;
    const auto name_len = b.get<std::uint32_t>();
    const auto* name = b.take(name_len);
    s.name.assign(name, name + name_len);
    const auto tag = b.get<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(DType::u8)) throw CheckpointError("corrupt checkpoint: unknown dtype");
    s.dtype = static_cast<DType>(tag);
    const auto rank = b.get<std::uint32_t>();
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      s.dims.push_back(b.get<std::uint64_t>());
      count *= s.dims.back();
    }
    const std::uint64_t n = count * element_size(s.dtype);
    const auto* payload = b.take(n);
    s.payload.assign(payload, payload + n);
    file.sections.push_back(std::move(s));
  }
  return file;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  const auto bytes = encode(file);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode(read_bytes(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::uint32_t file_crc32(const std::filesystem::path& path) { return crc32_of(read_bytes(path)); }

template <typename Real>
void add_model_sections(CheckpointFile& file, const network::SgcnModel<Real>& model) {
  const auto& store = model.store();
  for (const auto* p : store.parameters()) {
    file.sections.push_back(Section::from_tensor(param_key(p->name), p->value));
  }
  for (std::size_t i = 0; i < store.num_buffers(); ++i) {
    const auto& b = store.buffer(i);
    file.sections.push_back(Section::from_tensor(buffer_key(store.buffer_name(i), "mean"),
                                                 vector_tensor(b.running_mean)));
    file.sections.push_back(Section::from_tensor(buffer_key(store.buffer_name(i), "var"),
                                                 vector_tensor(b.running_var)));
  }
}

template <typename Real>
void add_optimizer_sections(CheckpointFile& file, const network::SgcnModel<Real>& model,
                            const numcore::AdamState<Real>& adam) {
  const auto params = model.store().parameters();
  if (adam.m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    file.sections.push_back(Section::from_tensor("adam/m/" + params[i]->name, adam.m.at(i)));
    file.sections.push_back(Section::from_tensor("adam/v/" + params[i]->name, adam.v.at(i)));
  }
}

namespace {

template <typename Real>
numcore::Tensor<Real> checked(const CheckpointFile& file, const std::string& key,
                              const numcore::Shape& shape) {
  auto t = file.at(key).template to_tensor<Real>();
  if (t.shape() != shape) {
    throw CheckpointError("checkpoint section '" + key + "' has shape " +
                          numcore::shape_string(t.shape()) + ", model expects " +
                          numcore::shape_string(shape));
  }
  return t;
}

}  // namespace

template <typename Real>
void restore_model(const CheckpointFile& file, network::SgcnModel<Real>& model) {
  auto& store = model.store();
  for (auto* p : store.parameters()) {
    p->value = checked<Real>(file, param_key(p->name), p->value.shape());
  }
  for (std::size_t i = 0; i < store.num_buffers(); ++i) {
    auto& b = store.buffer(i);
    const numcore::Shape shape{b.running_mean.size()};
    b.running_mean = checked<Real>(file, buffer_key(store.buffer_name(i), "mean"), shape).storage();
    b.running_var = checked<Real>(file, buffer_key(store.buffer_name(i), "var"), shape).storage();
  }
}

template <typename Real>
void restore_optimizer(const CheckpointFile& file, const network::SgcnModel<Real>& model,
                       numcore::AdamState<Real>& adam) {
  adam.m.clear();
  adam.v.clear();
  const auto params = model.store().parameters();
  if (!file.find("adam/m/" + params.front()->name)) return;
  for (const auto* p : params) {
    adam.m.push_back(checked<Real>(file, "adam/m/" + p->name, p->value.shape()));
    adam.v.push_back(checked<Real>(file, "adam/v/" + p->name, p->value.shape()));
  }
}

template <typename Real>
std::unique_ptr<network::SgcnModel<Real>> load_model(const CheckpointFile& file) {
  network::ModelConfig config;
  try {
    config = network::ModelConfig::from_json(file.config_json);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  numcore::Rng init(0);
  auto model = std::make_unique<network::SgcnModel<Real>>(std::move(config), init);
  restore_model(file, *model);
  return model;
}

#define SGCN_INSTANTIATE_CHECKPOINT(Real)                                                     \
  template Section Section::from_tensor<Real>(std::string, const numcore::Tensor<Real>&);     \
  template numcore::Tensor<Real> Section::to_tensor<Real>() const;                            \
  template void add_model_sections<Real>(CheckpointFile&, const network::SgcnModel<Real>&);   \
  template void add_optimizer_sections<Real>(CheckpointFile&, const network::SgcnModel<Real>&, \
                                             const numcore::AdamState<Real>&);                \
  template void restore_model<Real>(const CheckpointFile&, network::SgcnModel<Real>&);        \
  template void restore_optimizer<Real>(const CheckpointFile&, const network::SgcnModel<Real>&, \
                                        numcore::AdamState<Real>&);                           \
  template std::unique_ptr<network::SgcnModel<Real>> load_model<Real>(const CheckpointFile&);

SGCN_INSTANTIATE_CHECKPOINT(float)
SGCN_INSTANTIATE_CHECKPOINT(double)

#undef SGCN_INSTANTIATE_CHECKPOINT

}  // namespace sgcn::trainer
