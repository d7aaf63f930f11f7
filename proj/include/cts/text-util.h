// cts/text-util.h

// Copyright 2026  ctskit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CTS_TEXT_UTIL_H_
#define CTS_TEXT_UTIL_H_

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace cts {

std::vector<std::string> SplitWhitespace(std::string_view line);
std::vector<std::string> SplitOn(std::string_view s, char sep);

/// Strict numeric parsing; throws cts::Error naming `what` on failure.
/// ParseDouble accepts "inf", "-inf" and "nan".
double ParseDouble(std::string_view tok, std::string_view what = "number");
long long ParseInt(std::string_view tok, std::string_view what = "integer");

/// Shortest text that reads back to the identical double ("%.17g").
std::string FormatDouble(double v);

std::ifstream OpenInput(const std::string &path);
std::ofstream OpenOutput(const std::string &path);

}  // namespace cts

#endif  // CTS_TEXT_UTIL_H_
