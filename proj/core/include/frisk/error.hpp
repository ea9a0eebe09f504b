#pragma once

#include <stdexcept>
#include <string>

namespace frisk {

/// Raised for contract violations on inputs (bad ids, bad ranges, malformed
/// files). The message always names the offending element.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse/validation failure with a locus ("labels.csv:12", "nodes[3].profile").
class ParseError : public Error {
public:
    ParseError(std::string locus, const std::string& what)
        : Error(locus + ": " + what), locus_(std::move(locus)) {}

    const std::string& locus() const noexcept { return locus_; }

private:
    std::string locus_;
};

} // namespace frisk
