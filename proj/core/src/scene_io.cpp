#include "rba/scene_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "rba/errors.hpp"

namespace rba {

namespace {

constexpr char kMagic[5] = {'M', 'S', 'E', 'G', '1'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t n) : data_(data), size_(n) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void bytes(std::uint8_t* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) {
    require(pos_ + n <= size_, ErrorCategory::kFormat, "mseg1: truncated file");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_scene(const Scene& scene, const std::string& path) {
  const int H = scene.labels.height, W = scene.labels.width;
  const std::size_t C = scene.features.dim(0);
  require(scene.features.rank() == 3 && scene.features.dim(1) == static_cast<std::size_t>(H) &&
              scene.features.dim(2) == static_cast<std::size_t>(W),
          ErrorCategory::kInvalid, "mseg1: feature/label shape disagreement");

  std::string buf;
  buf.reserve(18 + 4 * scene.features.size() + scene.labels.size());
  buf.append(kMagic, 5);
  buf.push_back(static_cast<char>(kVersion));
  put_u32(buf, static_cast<std::uint32_t>(H));
  put_u32(buf, static_cast<std::uint32_t>(W));
  put_u32(buf, static_cast<std::uint32_t>(C));
  put_u32(buf, static_cast<std::uint32_t>(scene.meta.num_classes));
  for (std::size_t i = 0; i < scene.features.size(); ++i)
    put_f32(buf, static_cast<float>(scene.features[i]));
  buf.append(reinterpret_cast<const char*>(scene.labels.codes.data()), scene.labels.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCategory::kIo, "mseg1: cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorCategory::kIo, "mseg1: write failed: " + path);
}

Scene read_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "mseg1: cannot open: " + path);
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  Reader r(raw.data(), raw.size());

  char magic[5];
  r.bytes(reinterpret_cast<std::uint8_t*>(magic), 5);
  require(std::memcmp(magic, kMagic, 5) == 0, ErrorCategory::kFormat, "mseg1: bad magic");
  const std::uint8_t version = r.u8();
  require(version == kVersion, ErrorCategory::kFormat,
          "mseg1: unsupported version " + std::to_string(version));

  const std::uint32_t H = r.u32(), W = r.u32(), C = r.u32(), K = r.u32();
  require(H > 0 && W > 0 && C > 0, ErrorCategory::kFormat, "mseg1: zero dimension");
  require(static_cast<std::uint64_t>(H) * W * C <= (1ull << 31), ErrorCategory::kFormat,
          "mseg1: dimension overflow");
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t expected = 4 * C * plane + plane;
  require(r.remaining() == expected, ErrorCategory::kFormat,
          "mseg1: payload size does not match header");

  Scene scene;
  scene.meta.height = static_cast<int>(H);
  scene.meta.width = static_cast<int>(W);
  scene.meta.channels = static_cast<int>(C);
  scene.meta.num_classes = static_cast<int>(K);
  scene.features = Tensor({C, H, W});
  for (std::size_t i = 0; i < scene.features.size(); ++i)
    scene.features[i] = static_cast<double>(r.f32());
  ensure_finite(scene.features, "mseg1 features");
  scene.labels.height = static_cast<int>(H);
  scene.labels.width = static_cast<int>(W);
  scene.labels.codes.resize(plane);
  r.bytes(scene.labels.codes.data(), plane);
  return scene;
}

}  // namespace rba
