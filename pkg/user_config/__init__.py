# 用户配置包：默认场景配置与点号键加载器
