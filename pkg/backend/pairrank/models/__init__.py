# Domain data types
