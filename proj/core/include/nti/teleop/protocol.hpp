#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "nti/data/metrics.hpp"
#include "nti/imaging/image.hpp"
#include "nti/sim/types.hpp"

// JSON text messages exchanged with the teleoperation console. See docs/protocol.md.
namespace nti::teleop {

inline constexpr int kProtocolVersion = 1;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Control {
  std::uint64_t seq = 0;
  sim::ControlIncrement increment;
};

enum class RecordCommand { kStart, kStop, kSave, kDiscard };

std::string_view to_string(RecordCommand cmd);
RecordCommand record_command_from_string(std::string_view text);

struct Record {
  std::uint64_t seq = 0;
  RecordCommand command = RecordCommand::kStart;
};

struct Reset {
  std::uint64_t seq = 0;
  std::optional<std::uint64_t> seed;  // absent: keep the session seed
};

using ClientMessage = std::variant<Control, Record, Reset>;

std::uint64_t sequence_of(const ClientMessage& message);

// Throws ProtocolError on malformed JSON, a version mismatch, unknown types or bad fields.
ClientMessage parse_client_message(std::string_view text);
std::string serialize(const ClientMessage& message);

// Base64 of the PNG encoding; used for frames inside StateFrame messages.
std::string encode_frame(const Image& image);
Image decode_frame(std::string_view text);

nlohmann::json verdict_json(const data::Verdict& verdict);
data::Verdict verdict_from_json(const nlohmann::json& j);

}  // namespace nti::teleop
