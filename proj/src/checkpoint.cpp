#include "srgf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace srgf {

namespace {

constexpr char kMagic[5] = {'S', 'R', 'G', 'F', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_block(std::ostream& out, const std::string& name, const Matrix& m) {
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.values()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 4);
  }
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }

  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::pair<std::string, Matrix> block() {
    const std::uint64_t len = u64();
    if (len > 4096) fail("implausible block name length");
    std::string name(len, '\0');
    bytes(name.data(), len);
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) fail("implausible block shape for " + name);
    Matrix m(rows, cols);
    for (double& v : m.values()) {
      unsigned char b[4];
      bytes(reinterpret_cast<char*>(b), 4);
      std::uint32_t bits = 0;
      for (int i = 3; i >= 0; --i) bits = (bits << 8) | b[i];
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
    return {std::move(name), std::move(m)};
  }

  [[noreturn]] void fail(const std::string& msg) const { throw data::DataError(source_ + ": " + msg); }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::string source_;
};

std::uint64_t read_header(Reader& r) {
  char magic[5];
  r.bytes(magic, 5);
  if (std::memcmp(magic, kMagic, 5) != 0) r.fail("not a checkpoint (bad magic)");
  return r.u64();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, bool with_optimizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data::DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 5);
  put_u64(out, config_digest(model.config()));
  const auto& params = model.parameters();
  put_u64(out, params.size());
  for (const auto& p : params) put_block(out, p.name, p.value);

  const AdamState& adam = model.optimizer();
  const bool has_adam = with_optimizer && adam.first_moment.size() == params.size();
  out.put(has_adam ? 1 : 0);
  if (has_adam) {
    put_u64(out, adam.step);
    for (std::size_t k = 0; k < params.size(); ++k) {
      put_block(out, "adam.m." + params[k].name, adam.first_moment[k]);
      put_block(out, "adam.v." + params[k].name, adam.second_moment[k]);
    }
  }
  if (!out) throw data::DataError("failed writing checkpoint " + path.string());
}

std::uint64_t checkpoint_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  return read_header(r);
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  const std::uint64_t digest = read_header(r);
  const std::uint64_t expected = config_digest(model.config());
  if (digest != expected) {
    r.fail("config digest " + digest_hex(digest) + " does not match " + digest_hex(expected));
  }

  auto& params = model.parameters();
  const std::uint64_t count = r.u64();
  if (count != params.size()) {
    r.fail("holds " + std::to_string(count) + " parameters, model has " + std::to_string(params.size()));
  }
  std::vector<Matrix> values;
  for (const auto& p : params) {
    auto [name, m] = r.block();
    if (name != p.name) r.fail("expected block " + p.name + ", found " + name);
    if (!m.same_shape(p.value)) r.fail("block " + name + " has shape " + shape_string(m) + ", expected " + shape_string(p.value));
    values.push_back(std::move(m));
  }

  char flag = 0;
  r.bytes(&flag, 1);
  AdamState adam;
  adam.config = model.optimizer().config;
  if (flag == 1) {
    adam.step = r.u64();
    for (const auto& p : params) {
      auto [mn, m] = r.block();
      auto [vn, v] = r.block();
      if (mn != "adam.m." + p.name || vn != "adam.v." + p.name || !m.same_shape(p.value) || !v.same_shape(p.value)) {
        r.fail("malformed optimizer state for " + p.name);
      }
      adam.first_moment.push_back(std::move(m));
      adam.second_moment.push_back(std::move(v));
    }
  } else if (flag != 0) {
    r.fail("bad optimizer flag");
  }
  if (!r.at_end()) r.fail("trailing bytes");

  for (std::size_t k = 0; k < params.size(); ++k) params[k].value = std::move(values[k]);
  model.optimizer() = std::move(adam);
}

}  // namespace srgf
