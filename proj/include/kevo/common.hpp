#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kevo {

// Error taxonomy. Each class maps onto one failure category the operations
// report; callers catch the base type when they only care about pass/fail.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : Error { using Error::Error; };
struct ConflictError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };
struct TransportError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };
struct ExtractionError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct ArithmeticError : Error { using Error::Error; };
struct EnvironmentError : Error { using Error::Error; };
struct CompareError : Error { using Error::Error; };

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

std::string base64_encode(const void* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Deterministic RNG (xoroshiro128++ seeded via splitmix64). All value
/// transforms are done by hand; the standard <random> distributions are
/// implementation-defined and would break byte-reproducibility across
/// toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform01();                        // [0, 1)
    std::size_t uniform_index(std::size_t n);  // [0, n), n >= 1

    /// Independent stream derived from this rng's seed and a stream id.
    /// Two streams with distinct ids never share state.
    Rng derive(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t state_a_;
    std::uint64_t state_b_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_words(std::string_view text);
std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;  // stdout and stderr interleaved
};

/// Runs argv[0] with the given arguments, capturing combined output.
/// The child is killed if it exceeds timeout_ms (0 disables the deadline).
ProcessResult run_process(const std::vector<std::string>& argv, int timeout_ms);

}  // namespace kevo
