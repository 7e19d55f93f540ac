// Copyright 2026 The qtransfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRANSFER_PRESET_H
#define QTRANSFER_PRESET_H

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtransfer/device.h"

namespace qtransfer {

struct PresetEntry {
    std::string key;
    std::string value;
    int line = 0;
    int column = 0;
};

/// Flat `key = value` parameter file.
///
/// Keys are dotted DeviceParams paths with a unit suffix: `_ghz`, `_mhz`, `_khz`, `_hz` for
/// ordinary frequencies (stored as rad/s), `_us`, `_ns`, `_s` for times, `_inv_us`, `_inv_ns`
/// for rates given as lifetimes and `_per_s` for raw rates. `#` starts a comment.
///
///     omega_eg_ghz = 8.0
///     g.c2_mhz = 12.03
///     matching = from_g2      # mu and g_3..g_n follow from g_2
///     Omega_p = auto          # g~^2 / (4 m Delta~)
///     kappa.all_inv_us = 100
///     T_us = 15
class Preset {
   public:
    static Preset parse(std::istream &in, std::string source = "<input>");
    static Preset parse_string(const std::string &text, std::string source = "<input>");
    /// Throws ConfigError (with the path) when the file cannot be read.
    static Preset load(const std::string &path);

    /// Replaces or appends an entry; the key must be a known parameter path.
    void set(const std::string &key, const std::string &value);
    /// "key=value".
    void set_assignment(const std::string &assignment);
    void erase(const std::string &key);
    std::optional<std::string> get(const std::string &key) const;

    DeviceParams resolve() const;
    Truncation truncation() const;

    const std::vector<PresetEntry> &entries() const {
        return entries_;
    }
    const std::string &source() const {
        return source_;
    }
    /// Sorted `key=value` lines.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;

   private:
    std::vector<PresetEntry> entries_;
    std::string source_;
};

/// Throws ConfigError when `key` is not a recognized preset path.
void check_preset_key(const std::string &key, int line = 0, int column = 0);

std::string fnv1a_hex(const std::string &data);

}  // namespace qtransfer

#endif
