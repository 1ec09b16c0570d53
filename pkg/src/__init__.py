# DualOpt 核心包
