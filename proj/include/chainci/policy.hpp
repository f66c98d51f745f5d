/* Copyright 2026 The ChainCI Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <set>
#include <vector>

#include "chainci/canonical.hpp"

namespace chainci {

/// Boolean expression over org names deciding whose endorsements a
/// transaction needs: Org(name) leaves combined with And / Or / OutOf(k).
struct EndorsementPolicy {
    enum class Kind { Org, And, Or, OutOf };

    Kind kind = Kind::Org;
    std::string org;                         // Kind::Org
    int k = 0;                               // Kind::OutOf
    std::vector<EndorsementPolicy> children; // non-leaf kinds

    static EndorsementPolicy org_member(std::string name);
    static EndorsementPolicy all_of(std::vector<EndorsementPolicy> children);
    static EndorsementPolicy any_of(std::vector<EndorsementPolicy> children);
    static EndorsementPolicy out_of(int k, std::vector<EndorsementPolicy> children);
    static EndorsementPolicy any_org(const std::vector<std::string>& orgs);

    void validate() const; // throws BadPolicy

    json to_json() const;
    static EndorsementPolicy from_json(const json& j);
};

/// Structural evaluation; signature validity is the caller's concern.
bool evaluate_policy(const EndorsementPolicy& policy, const std::set<std::string>& endorsing_orgs);

} // namespace chainci
