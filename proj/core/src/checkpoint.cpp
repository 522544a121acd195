#include "streetvae/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "streetvae/error.hpp"

namespace streetvae {

using ojson = nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

const Tensor& Checkpoint::get(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw UsageError("checkpoint has no tensor named '" + std::string(name) + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ojson header;
  header["meta"] = ojson::parse(ckpt.meta_json);
  ojson entries = ojson::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    entries.push_back({{"name", t.name}, {"shape", {t.tensor.rows(), t.tensor.cols()}}, {"offset", offset}});
    offset += t.tensor.size() * sizeof(double);
  }
  header["tensors"] = std::move(entries);
  const std::string header_text = header.dump();

  std::string out(kCheckpointMagic);
  put_u64(out, header_text.size());
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto& t : ckpt.tensors) {
    const auto data = t.tensor.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (!bytes.starts_with(kCheckpointMagic)) throw ParseError("checkpoint: bad magic", 0);
  const std::size_t len_at = kCheckpointMagic.size();
  if (bytes.size() < len_at + 8) throw ParseError("checkpoint: truncated header length", len_at);
  const std::uint64_t header_len = get_u64(bytes, len_at);
  const std::size_t header_at = len_at + 8;
  if (bytes.size() - header_at < header_len) throw ParseError("checkpoint: truncated header", header_at);
  const std::size_t payload_at = header_at + header_len;

  ojson header;
  try {
    header = ojson::parse(bytes.substr(header_at, header_len));
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), header_at + e.byte);
  }

  Checkpoint ckpt;
  try {
    ckpt.meta_json = header.at("meta").dump();
    for (const auto& entry : header.at("tensors")) {
      const auto rows = entry.at("shape").at(0).get<std::size_t>();
      const auto cols = entry.at("shape").at(1).get<std::size_t>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t nbytes = rows * cols * sizeof(double);
      if (offset > bytes.size() - payload_at || nbytes > bytes.size() - payload_at - offset) {
        throw ParseError("checkpoint: tensor '" + entry.at("name").get<std::string>() + "' exceeds payload",
                         payload_at);
      }
      std::vector<double> values(rows * cols);
      std::memcpy(values.data(), bytes.data() + payload_at + offset, nbytes);
      ckpt.tensors.push_back({entry.at("name").get<std::string>(), Tensor::from(rows, cols, std::move(values))});
    }
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), header_at);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace streetvae
