# File-format readers
