// Copyright 2026 The latesearch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian byte buffers and checksummed file helpers shared by the
// on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "late/error.hpp"

namespace late::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

class ByteWriter {
  public:
    void u8(std::uint8_t v) {
        buf_.push_back(v);
    }
    void u32(std::uint32_t v) {
        put(v);
    }
    void u64(std::uint64_t v) {
        put(v);
    }
    void f32(float v) {
        put(v);
    }
    void f64(double v) {
        put(v);
    }
    void u16(std::uint16_t v) {
        put(v);
    }
    void raw(std::span<const std::uint8_t> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }
    void raw(std::string_view s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t>& bytes() noexcept {
        return buf_;
    }
    const std::vector<std::uint8_t>& bytes() const noexcept {
        return buf_;
    }

    /// Appends the CRC32 of everything written so far.
    void seal() {
        u32(crc32(buf_));
    }

  private:
    template <class T>
    void put(T v) {
        static_assert(std::endian::native == std::endian::little);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; errors carry the source name and byte offset.
class ByteReader {
  public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string source)
            : bytes_(bytes), source_(std::move(source)) {}

    std::uint8_t u8() {
        return get<std::uint8_t>();
    }
    std::uint16_t u16() {
        return get<std::uint16_t>();
    }
    std::uint32_t u32() {
        return get<std::uint32_t>();
    }
    std::uint64_t u64() {
        return get<std::uint64_t>();
    }
    float f32() {
        return get<float>();
    }
    double f64() {
        return get<double>();
    }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::string str(std::size_t n) {
        auto s = raw(n);
        return {reinterpret_cast<const char*>(s.data()), s.size()};
    }

    std::size_t offset() const noexcept {
        return pos_;
    }
    std::size_t remaining() const noexcept {
        return bytes_.size() - pos_;
    }
    const std::string& source() const noexcept {
        return source_;
    }

    [[noreturn]] void fail(ErrorKind kind, const std::string& what) const {
        throw Error(kind, source_ + " @" + std::to_string(pos_) + ": " + what);
    }

  private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            fail(ErrorKind::MalformedFile,
                 "truncated, need " + std::to_string(n) + " bytes, have " +
                         std::to_string(remaining()));
        }
    }

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

/// Streams bytes to a file and appends their CRC32 on close().
class SealedFileWriter {
  public:
    explicit SealedFileWriter(std::filesystem::path path);
    ~SealedFileWriter();
    SealedFileWriter(const SealedFileWriter&) = delete;
    SealedFileWriter& operator=(const SealedFileWriter&) = delete;

    void write(std::span<const std::uint8_t> bytes);
    void write(const ByteWriter& w) {
        write(w.bytes());
    }
    /// Bytes written so far, excluding the checksum.
    std::uint64_t size() const noexcept {
        return size_;
    }
    void close();

  private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::uint64_t crc_ = 0;
    std::uint64_t size_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

/// Verifies and strips a trailing little-endian CRC32.
std::span<const std::uint8_t> verify_sealed(
        std::span<const std::uint8_t> bytes,
        const std::string& source);

/// Text files carry their checksum on a final "#crc32 xxxxxxxx" line.
std::string seal_text(std::string text);
std::string verify_sealed_text(std::string_view text, const std::string& source);

} // namespace late::io
