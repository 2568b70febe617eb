#pragma once

#include <array>
#include <string_view>

namespace cbwatch {

/// Default offensive-term list for the mock backend; the synthetic generator
/// draws explicit insults from the same list.
inline constexpr std::array<std::string_view, 30> kDefaultOffensiveLexicon = {
    "傻子", "傻逼", "脑残", "白痴", "蠢货", "废物", "人渣", "滚蛋", "去死", "贱人",
    "畜生", "智障", "弱智", "狗东西", "神经病", "死全家", "不要脸", "贱货", "败类", "杂种",
    "混蛋", "王八蛋", "下三滥", "无耻", "丑八怪", "蠢猪", "废柴", "垃圾人", "喷子", "恶心死了",
};

}  // namespace cbwatch
