# Session blueprint: JWT login, logout and role activation
