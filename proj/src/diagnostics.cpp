#include "mml/diagnostics.hpp"

namespace mml {

std::string format_diagnostic(const SourceSpan& span, const std::string& message)
{
    return span.file_name() + ":" + std::to_string(span.line) + ":" + std::to_string(span.col) + ": " + message;
}

LexError::LexError(SourceSpan span, const std::string& message)
    : std::runtime_error(format_diagnostic(span, "lexical error: " + message)), span_(std::move(span)),
      message_(message)
{
}

SyntaxError::SyntaxError(SourceSpan span, const std::string& message)
    : std::runtime_error(format_diagnostic(span, "syntax error: " + message)), span_(std::move(span)),
      message_(message)
{
}

CompileError::CompileError(SourceSpan span, const std::string& message, std::vector<std::string> trace)
    : std::runtime_error(format_diagnostic(span, "error: " + message)), span_(std::move(span)), message_(message),
      trace_(std::move(trace))
{
}

void DiagnosticLog::warn(std::string message, SourceSpan span)
{
    entries_.push_back(Diagnostic{Severity::Warning, std::move(message), std::move(span), 0.0});
}

void DiagnosticLog::warn_at(double time, std::string message)
{
    entries_.push_back(Diagnostic{Severity::Warning, std::move(message), {}, time});
}

} // namespace mml
