#include "dsm/archive.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "dsm/error.hpp"
#include "json.hpp"

namespace dsm {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'S', 'M', 'A'};
constexpr double kStoredRowTolerance = 1e-4;
constexpr std::size_t kMaxChunk = std::size_t{1} << 30;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t crc_of(std::string_view a, std::string_view b) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(a.data()),
              static_cast<uInt>(a.size()));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(b.data()),
              static_cast<uInt>(b.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string encode_tensor(const std::vector<float>& tensor) {
  std::string out;
  out.reserve(tensor.size() * 4);
  for (float f : tensor) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads exactly `n` bytes or reports truncation via `what`.
  std::string bytes(std::size_t n, const std::string& what) {
    if (n > kMaxChunk) throw ArchiveError("implausible length in " + what);
    std::string buf(n, '\0');
    in_.read(buf.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ArchiveError("truncated archive: " + what);
    }
    return buf;
  }
  std::uint32_t u32(const std::string& what) {
    const std::string b = bytes(4, what);
    return get_u32(reinterpret_cast<const unsigned char*>(b.data()));
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

std::string sentence_key(const std::vector<std::string>& words) {
  std::string key;
  for (const auto& w : words) {
    if (!key.empty()) key += ' ';
    key += w;
  }
  return key;
}

Archive::Archive(ArchiveHeader header, std::vector<ArchiveRecord> records)
    : header_(std::move(header)), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    index_.emplace(sentence_key(records_[i].words), i);
  }
}

const ArchiveRecord* Archive::find(const std::vector<std::string>& words) const {
  auto it = index_.find(sentence_key(words));
  return it == index_.end() ? nullptr : &records_[it->second];
}

void write_archive(std::ostream& out, const ArchiveHeader& header,
                   std::span<const ArchiveRecord> records) {
  const std::size_t per_cell = header.layers.size() * static_cast<std::size_t>(header.heads);
  std::string buf(kMagic, 4);
  put_u16(buf, kArchiveVersion);
  json h;
  h["format_version"] = kArchiveVersion;
  h["model"] = header.model;
  h["layers"] = header.layers;
  h["heads"] = header.heads;
  h["sentence_count"] = records.size();
  h["meta"] = header.meta;
  const std::string hs = h.dump();
  put_u32(buf, static_cast<std::uint32_t>(hs.size()));
  buf += hs;
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  for (const auto& r : records) {
    const std::size_t n = r.n();
    if (r.tensor.size() != per_cell * n * n) {
      throw ArchiveError("record '" + sentence_key(r.words) +
                         "' has tensor size " + std::to_string(r.tensor.size()) +
                         ", expected " + std::to_string(per_cell * n * n));
    }
    const std::string sj = json{{"words", r.words}, {"n", n}}.dump();
    const std::string tensor = encode_tensor(r.tensor);
    std::string rec;
    put_u32(rec, static_cast<std::uint32_t>(sj.size()));
    rec += sj;
    rec += tensor;
    put_u32(rec, crc_of(sj, tensor));
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw ArchiveError("write failed");
}

Archive read_archive(std::istream& in) {
  Reader rd(in);
  const std::string magic = rd.bytes(4, "magic");
  if (magic != std::string_view(kMagic, 4)) throw ArchiveError("bad magic");
  const std::string vb = rd.bytes(2, "version");
  const auto version = static_cast<std::uint16_t>(
      static_cast<unsigned char>(vb[0]) | static_cast<unsigned char>(vb[1]) << 8);
  if (version != kArchiveVersion) {
    throw ArchiveError("version mismatch: archive has " +
                       std::to_string(version) + ", reader supports " +
                       std::to_string(kArchiveVersion));
  }
  const std::uint32_t hlen = rd.u32("header length");
  ArchiveHeader header;
  std::size_t count = 0;
  try {
    const json h = json::parse(rd.bytes(hlen, "header"));
    header.model = h.at("model").get<std::string>();
    header.layers = h.at("layers").get<std::vector<int>>();
    header.heads = h.at("heads").get<int>();
    header.meta = h.at("meta").get<std::map<std::string, std::string>>();
    count = h.at("sentence_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("bad header: ") + e.what());
  }
  const std::size_t per_cell = header.layers.size() * static_cast<std::size_t>(header.heads);

  std::vector<ArchiveRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string which = "record " + std::to_string(i);
    const std::uint32_t slen = rd.u32(which);
    const std::string sj = rd.bytes(slen, which);
    // The length fields are not covered by the CRC, so a corrupted one can
    // surface as a parse failure; report it against the record as well.
    ArchiveRecord r;
    try {
      const json s = json::parse(sj);
      r.words = s.at("words").get<std::vector<std::string>>();
      if (s.at("n").get<std::size_t>() != r.words.size()) throw ChecksumError(i);
    } catch (const json::exception&) {
      throw ChecksumError(i);
    }
    const std::size_t n = r.words.size();
    const std::string tensor = rd.bytes(per_cell * n * n * 4, which);
    const std::uint32_t crc = rd.u32(which);
    if (crc != crc_of(sj, tensor)) throw ChecksumError(i);
    r.tensor.resize(per_cell * n * n);
    const auto* p = reinterpret_cast<const unsigned char*>(tensor.data());
    for (std::size_t k = 0; k < r.tensor.size(); ++k) {
      r.tensor[k] = std::bit_cast<float>(get_u32(p + 4 * k));
    }
    for (std::size_t row = 0; row < per_cell * n; ++row) {
      double sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const float v = r.tensor[row * n + c];
        if (!std::isfinite(v) || v < 0.0f) {
          throw ArchiveError(which + ": attention entry not finite and >= 0");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kStoredRowTolerance) {
        throw ArchiveError(which + ": row " + std::to_string(row) +
                           " is not row-stochastic");
      }
    }
    records.push_back(std::move(r));
  }
  if (!rd.at_end()) {
    throw ArchiveError("trailing data after " + std::to_string(count) +
                       " records");
  }
  return Archive(std::move(header), std::move(records));
}

void write_archive_file(const std::string& path, const ArchiveHeader& header,
                        std::span<const ArchiveRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArchiveError("cannot open " + path + " for writing");
  write_archive(out, header, records);
}

Archive read_archive_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path);
  return read_archive(in);
}

ArchiveRecord make_record(const std::vector<std::string>& words,
                          const LayerHeads& attention,
                          const ArchiveHeader& header) {
  const std::size_t n = words.size();
  ArchiveRecord r;
  r.words = words;
  r.tensor.reserve(header.layers.size() * static_cast<std::size_t>(header.heads) * n * n);
  for (int layer : header.layers) {
    auto it = attention.find(layer);
    if (it == attention.end()) {
      throw ArchiveError("attention for layer " + std::to_string(layer) +
                         " missing");
    }
    if (it->second.size() != static_cast<std::size_t>(header.heads)) {
      throw ArchiveError("head count mismatch at layer " + std::to_string(layer));
    }
    for (const auto& m : it->second) {
      if (m.n() != n) throw ArchiveError("matrix size differs from word count");
      for (double v : m.values.values()) r.tensor.push_back(static_cast<float>(v));
    }
  }
  return r;
}

LayerHeads record_attention(const ArchiveRecord& record,
                            const ArchiveHeader& header) {
  const std::size_t n = record.n();
  LayerHeads out;
  std::size_t offset = 0;
  for (int layer : header.layers) {
    auto& heads = out[layer];
    for (int h = 0; h < header.heads; ++h) {
      std::vector<double> values(record.tensor.begin() + static_cast<std::ptrdiff_t>(offset),
                                 record.tensor.begin() + static_cast<std::ptrdiff_t>(offset + n * n));
      offset += n * n;
      heads.push_back({SquareMatrix(n, std::move(values)), layer, h, true});
    }
  }
  return out;
}

}  // namespace dsm
