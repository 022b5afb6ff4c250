#include "plaid/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "plaid/error.hpp"

namespace plaid {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string line(std::string_view what) {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) throw TruncationError("checkpoint truncated in " + std::string(what));
    std::string out(bytes_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  std::string_view take(std::size_t n, std::string_view what) {
    if (bytes_.size() - pos_ < n) throw TruncationError("checkpoint truncated in " + std::string(what));
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string expect_field(const std::string& line, const std::string& key) {
  if (line.rfind(key + " ", 0) != 0) throw FormatError("expected '" + key + "' header line, got '" + line + "'");
  return line.substr(key.size() + 1);
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw FormatError("bad " + key + " value '" + text + "'");
  }
  if (pos != text.size()) throw FormatError("bad " + key + " value '" + text + "'");
  return v;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::stringstream ss(text);
  std::string dim;
  while (std::getline(ss, dim, 'x')) shape.push_back(static_cast<std::size_t>(parse_u64(dim, "shape")));
  if (shape.empty()) throw FormatError("empty shape");
  return shape;
}

NetworkSpec read_header(Reader& in, std::uint64_t& seed, std::uint64_t& updates, std::size_t& layers) {
  if (in.line("magic") + "\n" != kCheckpointMagic) throw FormatError("not a PLAID checkpoint (bad magic)");
  const auto version = in.line("version");
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version '" + version + "', expected " +
                       std::string(kCheckpointVersion));
  }
  NetworkSpec spec = NetworkSpec::parse(expect_field(in.line("spec"), "spec"));
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid spec in checkpoint: ") + e.what());
  }
  seed = parse_u64(expect_field(in.line("seed"), "seed"), "seed");
  updates = parse_u64(expect_field(in.line("updates"), "updates"), "updates");
  layers = static_cast<std::size_t>(parse_u64(expect_field(in.line("layers"), "layers"), "layers"));
  return spec;
}

}  // namespace

std::string save_checkpoint(const Network& net) {
  std::string out;
  out += kCheckpointMagic;
  out += kCheckpointVersion;
  out += '\n';
  out += "spec " + net.spec().to_string() + "\n";
  out += "seed " + std::to_string(net.seed()) + "\n";
  out += "updates " + std::to_string(net.update_count()) + "\n";
  out += "layers " + std::to_string(net.params().size()) + "\n";
  for (const auto& t : net.params()) {
    out += "layer " + t.name + " " + t.shape_string() + "\n";
    for (float v : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    out += '\n';
  }
  return out;
}

Network load_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  std::uint64_t seed = 0, updates = 0;
  std::size_t layers = 0;
  const NetworkSpec spec = read_header(in, seed, updates, layers);
  const ParamSet expected = make_param_shapes(spec);

  ParamSet params;
  for (std::size_t i = 0; i < layers; ++i) {
    const auto record = expect_field(in.line("layer record"), "layer");
    const auto space = record.rfind(' ');
    if (space == std::string::npos) throw FormatError("malformed layer record '" + record + "'");
    Tensor t;
    t.name = record.substr(0, space);
    t.shape = parse_shape(record.substr(space + 1));
    if (i >= expected.size() || expected[i].name != t.name) {
      throw ShapeError("layer " + t.name + ": not part of network spec " + spec.to_string());
    }
    if (expected[i].shape != t.shape) {
      throw ShapeError("layer " + t.name + ": shape " + t.shape_string() + " does not match spec shape " +
                       expected[i].shape_string());
    }
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    const auto payload = in.take(n * 4, "layer " + t.name);
    t.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= std::uint32_t(static_cast<unsigned char>(payload[k * 4 + b])) << (8 * b);
      }
      t.values[k] = std::bit_cast<float>(bits);
    }
    if (in.take(1, "layer " + t.name) != "\n") throw FormatError("missing record terminator after " + t.name);
    params.push_back(std::move(t));
  }
  if (params.size() != expected.size()) {
    throw ShapeError("layer " + expected[params.size()].name + ": missing from checkpoint");
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last layer record");
  return Network(spec, std::move(params), seed, updates);
}

void write_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const auto bytes = save_checkpoint(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

namespace {
std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Network read_checkpoint(const std::filesystem::path& path) { return load_checkpoint(slurp(path)); }

NetworkSpec read_checkpoint_spec(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  Reader in(bytes);
  std::uint64_t seed = 0, updates = 0;
  std::size_t layers = 0;
  return read_header(in, seed, updates, layers);
}

}  // namespace plaid
