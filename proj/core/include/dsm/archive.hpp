#pragma once

// Binary attention archive.
//
//   "DSMA" | u16 version | u32 len | header JSON
//   per record: u32 len | sentence JSON | f32 tensor | u32 CRC32
//
// Integers and floats are little-endian. The tensor is word-level attention
// laid out [layer][head][row][col]; the CRC covers the sentence JSON and the
// tensor bytes.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsm/attention.hpp"

namespace dsm {

inline constexpr std::uint16_t kArchiveVersion = 1;

struct ArchiveHeader {
  std::string model;
  std::vector<int> layers;
  int heads = 0;
  std::map<std::string, std::string> meta;  // provenance, free-form

  bool operator==(const ArchiveHeader&) const = default;
};

struct ArchiveRecord {
  std::vector<std::string> words;
  std::vector<float> tensor;  // layers × heads × n × n

  std::size_t n() const noexcept { return words.size(); }
  bool operator==(const ArchiveRecord&) const = default;
};

class Archive {
 public:
  Archive() = default;
  Archive(ArchiveHeader header, std::vector<ArchiveRecord> records);

  const ArchiveHeader& header() const { return header_; }
  const std::vector<ArchiveRecord>& records() const { return records_; }

  // Lookup by word sequence; nullptr when absent.
  const ArchiveRecord* find(const std::vector<std::string>& words) const;

 private:
  ArchiveHeader header_;
  std::vector<ArchiveRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

void write_archive(std::ostream& out, const ArchiveHeader& header,
                   std::span<const ArchiveRecord> records);

// Throws ArchiveError on bad magic, version mismatch, truncation, record
// count mismatch or non-stochastic rows; ChecksumError names the record.
Archive read_archive(std::istream& in);

void write_archive_file(const std::string& path, const ArchiveHeader& header,
                        std::span<const ArchiveRecord> records);
Archive read_archive_file(const std::string& path);

ArchiveRecord make_record(const std::vector<std::string>& words,
                          const LayerHeads& attention,
                          const ArchiveHeader& header);
LayerHeads record_attention(const ArchiveRecord& record,
                            const ArchiveHeader& header);

std::string sentence_key(const std::vector<std::string>& words);

}  // namespace dsm
