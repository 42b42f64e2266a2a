"""Grid-asset depreciation under PEV charging: thermal and tap-changer aging, TCO, MCS."""
__version__ = "0.1.0"
