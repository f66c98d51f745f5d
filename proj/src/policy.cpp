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

#include "chainci/policy.hpp"

namespace chainci {

EndorsementPolicy EndorsementPolicy::org_member(std::string name) {
    EndorsementPolicy p;
    p.kind = Kind::Org;
    p.org = std::move(name);
    return p;
}

EndorsementPolicy EndorsementPolicy::all_of(std::vector<EndorsementPolicy> children) {
    EndorsementPolicy p;
    p.kind = Kind::And;
    p.children = std::move(children);
    return p;
}

EndorsementPolicy EndorsementPolicy::any_of(std::vector<EndorsementPolicy> children) {
    EndorsementPolicy p;
    p.kind = Kind::Or;
    p.children = std::move(children);
    return p;
}

EndorsementPolicy EndorsementPolicy::out_of(int k, std::vector<EndorsementPolicy> children) {
    EndorsementPolicy p;
    p.kind = Kind::OutOf;
    p.k = k;
    p.children = std::move(children);
    return p;
}

EndorsementPolicy EndorsementPolicy::any_org(const std::vector<std::string>& orgs) {
    std::vector<EndorsementPolicy> leaves;
    leaves.reserve(orgs.size());
    for (const auto& o : orgs) leaves.push_back(org_member(o));
    return out_of(1, std::move(leaves));
}

void EndorsementPolicy::validate() const {
    switch (kind) {
    case Kind::Org:
        if (org.empty()) throw Error("BadPolicy", "org leaf with empty name");
        return;
    case Kind::And:
    case Kind::Or:
        if (children.empty()) throw Error("BadPolicy", "and/or node with no children");
        break;
    case Kind::OutOf:
        if (children.empty()) throw Error("BadPolicy", "out_of node with no children");
        if (k < 1 || k > static_cast<int>(children.size())) {
            throw Error("BadPolicy", "out_of k must be in [1, children]");
        }
        break;
    }
    for (const auto& c : children) c.validate();
}

json EndorsementPolicy::to_json() const {
    switch (kind) {
    case Kind::Org:
        return json{{"name", org}, {"type", "org"}};
    case Kind::And:
    case Kind::Or:
    case Kind::OutOf: {
        json kids = json::array();
        for (const auto& c : children) kids.push_back(c.to_json());
        if (kind == Kind::And) return json{{"children", kids}, {"type", "and"}};
        if (kind == Kind::Or) return json{{"children", kids}, {"type", "or"}};
        return json{{"children", kids}, {"k", k}, {"type", "out_of"}};
    }
    }
    throw Error("BadPolicy", "unhandled node kind");
}

EndorsementPolicy EndorsementPolicy::from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    EndorsementPolicy p;
    if (type == "org") {
        p = org_member(j.at("name").get<std::string>());
    } else if (type == "and" || type == "or" || type == "out_of") {
        std::vector<EndorsementPolicy> kids;
        for (const auto& c : j.at("children")) kids.push_back(from_json(c));
        if (type == "and") {
            p = all_of(std::move(kids));
        } else if (type == "or") {
            p = any_of(std::move(kids));
        } else {
            p = out_of(j.at("k").get<int>(), std::move(kids));
        }
    } else {
        throw Error("BadPolicy", "unknown node type '" + type + "'");
    }
    p.validate();
    return p;
}

bool evaluate_policy(const EndorsementPolicy& policy, const std::set<std::string>& endorsing_orgs) {
    switch (policy.kind) {
    case EndorsementPolicy::Kind::Org:
        return endorsing_orgs.count(policy.org) > 0;
    case EndorsementPolicy::Kind::And: {
        for (const auto& c : policy.children) {
            if (!evaluate_policy(c, endorsing_orgs)) return false;
        }
        return true;
    }
    case EndorsementPolicy::Kind::Or: {
        for (const auto& c : policy.children) {
            if (evaluate_policy(c, endorsing_orgs)) return true;
        }
        return false;
    }
    case EndorsementPolicy::Kind::OutOf: {
        int satisfied = 0;
        for (const auto& c : policy.children) {
            if (evaluate_policy(c, endorsing_orgs)) ++satisfied;
        }
        return satisfied >= policy.k;
    }
    }
    return false;
}

} // namespace chainci
