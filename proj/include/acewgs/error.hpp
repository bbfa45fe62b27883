#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace acewgs {

/// Every failure the library raises carries one of these codes. The code
/// name is what goes on the wire (`{code, message}`) and on the CLI's
/// one-line error output.
enum class Errc {
    // llm_gateway
    ConnectionFailed,
    ModelNotFound,
    MalformedResponse,
    EmptyPrompt,
    DimensionMismatch,
    PortUnavailable,
    // switch_router
    UnknownReference,
    RulesFormat,
    // corpus_store
    ParseError,
    DuplicateRefId,
    MissingField,
    InvalidParams,
    MissingText,
    // metadata_query
    SyntaxError,
    UnknownField,
    TypeError,
    TranslationExhausted,
    // vector_index
    ZeroVector,
    EmptyIndex,
    FormatError,
    TruncatedFile,
    // comprehension_rag
    ArticleNotIndexed,
    EmptyRetrieval,
    // thermo_equilibrium
    OutOfRange,
    InvalidFeed,
    NonConvergence,
    // surrogate_model
    UnknownCatalogId,
    SchemaMismatch,
    NonFiniteActivation,
    DimensionChainBroken,
    InvalidDesign,
    // pso_optimizer
    InfeasibleSpace,
    // inverse_feature
    InvalidSettings,
    UnknownJob,
    // service_api
    ConfigError,
    BadRequest,
    IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::ConnectionFailed: return "ConnectionFailed";
    case Errc::ModelNotFound: return "ModelNotFound";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::EmptyPrompt: return "EmptyPrompt";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::PortUnavailable: return "PortUnavailable";
    case Errc::UnknownReference: return "UnknownReference";
    case Errc::RulesFormat: return "RulesFormat";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateRefId: return "DuplicateRefId";
    case Errc::MissingField: return "MissingField";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::MissingText: return "MissingText";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownField: return "UnknownField";
    case Errc::TypeError: return "TypeError";
    case Errc::TranslationExhausted: return "TranslationExhausted";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::FormatError: return "FormatError";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ArticleNotIndexed: return "ArticleNotIndexed";
    case Errc::EmptyRetrieval: return "EmptyRetrieval";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidFeed: return "InvalidFeed";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::UnknownCatalogId: return "UnknownCatalogId";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::NonFiniteActivation: return "NonFiniteActivation";
    case Errc::DimensionChainBroken: return "DimensionChainBroken";
    case Errc::InvalidDesign: return "InvalidDesign";
    case Errc::InfeasibleSpace: return "InfeasibleSpace";
    case Errc::InvalidSettings: return "InvalidSettings";
    case Errc::UnknownJob: return "UnknownJob";
    case Errc::ConfigError: return "ConfigError";
    case Errc::BadRequest: return "BadRequest";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::size_t> position = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), message_(message), position_(position) {}

    Errc code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    /// Byte offset into the offending input, for parse errors.
    std::optional<std::size_t> position() const noexcept { return position_; }

private:
    Errc code_;
    std::string message_;
    std::optional<std::size_t> position_;
};

} // namespace acewgs
