#include "semgap/farm.hpp"

#include <algorithm>
#include <cstring>

namespace semgap {

FarmObject::FarmObject(RemoteMemory& mem, std::size_t base_offset,
                       std::size_t object_bytes)
    : mem_(mem), base_(base_offset), object_bytes_(object_bytes) {
  if (object_bytes == 0) throw SimError("farm object must be non-empty");
  if (base_ + FarmLayout::region_bytes(object_bytes) > mem.size_bytes()) {
    throw OutOfRangeError("farm object does not fit in memory");
  }
}

std::size_t FarmObject::line_data_bytes(std::size_t i) const {
  const std::size_t full = FarmLayout::kDataPerLine;
  const std::size_t begin = i * full;
  return std::min(full, object_bytes_ - begin);
}

void FarmObject::seed(std::uint64_t version, std::span<const std::byte> data) {
  if (data.size() != object_bytes_) {
    throw SimError("seed data size mismatch");
  }
  auto slices = split_farm_lines(data);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    write_line(i, slices[i], version);
  }
  mem_.place_u64(header_offset(), version);
  mem_.promote_range(base_, FarmLayout::region_bytes(object_bytes_), 0);
}

std::uint64_t FarmObject::committed_version() const {
  return mem_.read_placed_u64(header_offset());
}

void FarmObject::write_line(std::size_t i, std::span<const std::byte> data,
                            std::uint64_t version) {
  if (i >= line_count()) throw OutOfRangeError("line index out of range");
  if (data.size() > FarmLayout::kDataPerLine) {
    throw SimError("line data exceeds 56 bytes");
  }
  std::vector<std::byte> line(FarmLayout::kLineSize, std::byte{0});
  std::memcpy(line.data(), data.data(), data.size());
  store_u64(std::span<std::byte>(line), FarmLayout::kDataPerLine, version);
  mem_.place(line_offset(i), line);
}

std::vector<std::byte> FarmObject::read_line_data(std::size_t i) const {
  if (i >= line_count()) throw OutOfRangeError("line index out of range");
  return mem_.read_placed(line_offset(i), line_data_bytes(i));
}

std::uint64_t FarmObject::read_line_version(std::size_t i) const {
  if (i >= line_count()) throw OutOfRangeError("line index out of range");
  return mem_.read_placed_u64(line_offset(i) + FarmLayout::kDataPerLine);
}

std::uint64_t FarmObject::header_cas(std::uint64_t expect,
                                     std::uint64_t swap) {
  const std::uint64_t prior = mem_.read_placed_u64(header_offset());
  if (prior == expect) {
    mem_.place_u64(header_offset(), swap);
  }
  return prior;
}

std::vector<std::vector<std::byte>> split_farm_lines(
    std::span<const std::byte> data) {
  std::vector<std::vector<std::byte>> slices;
  const std::size_t n = FarmLayout::versioned_line_count(data.size());
  slices.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = i * FarmLayout::kDataPerLine;
    const std::size_t end =
        std::min(data.size(), begin + FarmLayout::kDataPerLine);
    slices.emplace_back(data.begin() + begin, data.begin() + end);
  }
  return slices;
}

FarmWriter::FarmWriter(FarmObject& obj, std::uint64_t new_version,
                       std::span<const std::byte> data)
    : obj_(obj), version_(new_version), slices_(split_farm_lines(data)) {
  if (data.size() != obj.object_bytes()) {
    throw SimError("writer data size mismatch");
  }
  if (new_version != obj.committed_version() + 1) {
    throw SimError("new_version must be committed_version + 1");
  }
}

void FarmWriter::step() {
  if (done()) throw SimError("writer already finished");
  obj_.write_line(next_line_, slices_[next_line_], version_);
  ++next_line_;
}

FarmWriter::CommitResult FarmWriter::commit() {
  if (!done()) throw SimError("commit before all lines written");
  prior_ = obj_.header_cas(version_ - 1, version_);
  return prior_ == version_ - 1 ? CommitResult::Committed
                                : CommitResult::CasConflict;
}

FarmReader::FarmReader(const FarmObject& obj) : obj_(&obj) {
  pass1_data_.resize(obj.line_count());
  pass1_versions_.resize(obj.line_count());
  pass2_versions_.resize(obj.line_count());
}

void FarmReader::step_pass1() {
  if (pass1_done()) throw SimError("pass 1 already finished");
  pass1_data_[pass1_next_] = obj_->read_line_data(pass1_next_);
  pass1_versions_[pass1_next_] = obj_->read_line_version(pass1_next_);
  ++pass1_next_;
}

void FarmReader::step_pass2() {
  if (!pass1_done()) throw SimError("pass 2 before pass 1 finished");
  if (pass2_done()) throw SimError("pass 2 already finished");
  pass2_versions_[pass2_next_] = obj_->read_line_version(pass2_next_);
  ++pass2_next_;
}

void FarmReader::run_remaining_attempt() {
  while (!pass1_done()) step_pass1();
  while (!pass2_done()) step_pass2();
}

bool FarmReader::attempt_consistent() const {
  if (!attempt_complete()) throw SimError("attempt not finished");
  const std::uint64_t v = pass1_versions_.front();
  return std::all_of(pass1_versions_.begin(), pass1_versions_.end(),
                     [v](std::uint64_t x) { return x == v; }) &&
         std::all_of(pass2_versions_.begin(), pass2_versions_.end(),
                     [v](std::uint64_t x) { return x == v; });
}

void FarmReader::reset_attempt() {
  pass1_next_ = 0;
  pass2_next_ = 0;
}

std::vector<std::byte> FarmReader::snapshot() const {
  if (!pass1_done()) throw SimError("snapshot before pass 1 finished");
  std::vector<std::byte> out;
  out.reserve(obj_->object_bytes());
  for (const auto& slice : pass1_data_) {
    out.insert(out.end(), slice.begin(), slice.end());
  }
  return out;
}

FarmReadOutcome farm_read(const FarmObject& obj, unsigned max_retries,
                          const std::function<void()>& between_attempts) {
  FarmReader reader(obj);
  FarmReadOutcome out;
  for (unsigned attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      if (between_attempts) between_attempts();
      reader.reset_attempt();
    }
    reader.run_remaining_attempt();
    if (reader.attempt_consistent()) {
      out.resolved = true;
      out.data = reader.snapshot();
      out.version = reader.pass1_versions().front();
      out.retries = attempt;
      return out;
    }
  }
  out.retries = max_retries;
  return out;
}

FarmWritePlan post_farm_write(VerbsEngine& engine, QpId qp, FarmObject& obj,
                              std::uint64_t new_version,
                              std::span<const std::byte> data) {
  if (data.size() != obj.object_bytes()) {
    throw SimError("writer data size mismatch");
  }
  FarmWritePlan plan;
  auto slices = split_farm_lines(data);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    std::vector<std::byte> line(FarmLayout::kLineSize, std::byte{0});
    std::memcpy(line.data(), slices[i].data(), slices[i].size());
    store_u64(std::span<std::byte>(line), FarmLayout::kDataPerLine,
              new_version);
    plan.line_ops.push_back(engine.post_write(qp, line, obj.line_offset(i)));
  }
  plan.cas_op = engine.post_atomic(qp, Verb::AtomicCas, obj.header_offset(),
                                   cas_operands(new_version - 1, new_version));
  return plan;
}

}  // namespace semgap
