#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cstwsf {

/// Machine-readable failure categories. The CLI prints the code as a
/// single-token prefix on stderr.
enum class ErrorCode {
	InvalidArgument,
	MalformedInput,
	GapExceedsLimit,
	InsufficientData,
	RankDeficient,
	CombinatorialLimit,
	Unstable,
	ExcessiveClipping,
	SolverFailure,
	ConfigError,
	IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
	switch (code) {
	case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
	case ErrorCode::MalformedInput: return "E_MALFORMED_INPUT";
	case ErrorCode::GapExceedsLimit: return "E_GAP_EXCEEDS_LIMIT";
	case ErrorCode::InsufficientData: return "E_INSUFFICIENT_DATA";
	case ErrorCode::RankDeficient: return "E_RANK_DEFICIENT";
	case ErrorCode::CombinatorialLimit: return "E_COMBINATORIAL_LIMIT";
	case ErrorCode::Unstable: return "E_UNSTABLE";
	case ErrorCode::ExcessiveClipping: return "E_EXCESSIVE_CLIPPING";
	case ErrorCode::SolverFailure: return "E_SOLVER_FAILURE";
	case ErrorCode::ConfigError: return "E_CONFIG";
	case ErrorCode::IoError: return "E_IO";
	}
	return "E_UNKNOWN";
}

class Error : public std::runtime_error {
public:
	Error(ErrorCode code, const std::string &message)
	    : std::runtime_error(message), code_(code) {}

	ErrorCode code() const noexcept { return code_; }

private:
	ErrorCode code_;
};

} // namespace cstwsf
