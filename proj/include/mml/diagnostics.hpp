#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mml {

/// Location of a token or construct in an .mml source file (1-based line and column).
struct SourceSpan {
    std::shared_ptr<const std::string> file;
    int line = 0;
    int col = 0;
    std::size_t offset = 0;
    std::size_t length = 0;

    std::string file_name() const { return file ? *file : std::string("<input>"); }
};

/// Renders `file:line:col: message`.
std::string format_diagnostic(const SourceSpan& span, const std::string& message);

class LexError : public std::runtime_error {
public:
    LexError(SourceSpan span, const std::string& message);
    const SourceSpan& span() const { return span_; }
    const std::string& message() const { return message_; }

private:
    SourceSpan span_;
    std::string message_;
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(SourceSpan span, const std::string& message);
    const SourceSpan& span() const { return span_; }
    const std::string& message() const { return message_; }

private:
    SourceSpan span_;
    std::string message_;
};

/// Semantic error raised by the analyzer. `trace` carries the scope search for unresolved symbols.
class CompileError : public std::runtime_error {
public:
    CompileError(SourceSpan span, const std::string& message, std::vector<std::string> trace = {});
    const SourceSpan& span() const { return span_; }
    const std::string& message() const { return message_; }
    const std::vector<std::string>& trace() const { return trace_; }

private:
    SourceSpan span_;
    std::string message_;
    std::vector<std::string> trace_;
};

/// Raised by the runtime engines for conditions that abort a run (non-finite state, stale ids).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string message;
    SourceSpan span;
    double time = 0.0;
};

/// Collects non-fatal diagnostics emitted while compiling or running a model.
class DiagnosticLog {
public:
    void warn(std::string message, SourceSpan span = {});
    void warn_at(double time, std::string message);
    const std::vector<Diagnostic>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    void clear() { entries_.clear(); }

private:
    std::vector<Diagnostic> entries_;
};

} // namespace mml
